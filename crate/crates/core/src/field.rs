use std::fmt;
use std::sync::Arc;

use crate::Point;

/// A real-valued function of position, shared and immutable.
///
/// Coefficients `a(x)`, exponents `p(x)`, forcing `f` and boundary data `g` all
/// use this type. Constant fields are tagged so that laws built from them can
/// be simplified and compared.
#[derive(Clone)]
pub struct Field {
    repr: Repr,
}

#[derive(Clone)]
enum Repr {
    Constant(f64),
    Func(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl Field {
    pub fn constant(value: f64) -> Self {
        Field {
            repr: Repr::Constant(value),
        }
    }

    pub fn from_fn(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Field {
            repr: Repr::Func(Arc::new(f)),
        }
    }

    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        match &self.repr {
            Repr::Constant(c) => *c,
            Repr::Func(f) => f(x),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.repr {
            Repr::Constant(c) => Some(c),
            Repr::Func(_) => None,
        }
    }

    /// Pointwise `self + c`.
    pub fn shifted(&self, c: f64) -> Field {
        match &self.repr {
            Repr::Constant(v) => Field::constant(v + c),
            Repr::Func(f) => {
                let f = f.clone();
                Field::from_fn(move |x| f(x) + c)
            }
        }
    }

    /// Pointwise `c * self`.
    pub fn scaled(&self, c: f64) -> Field {
        match &self.repr {
            Repr::Constant(v) => Field::constant(c * v),
            Repr::Func(f) => {
                let f = f.clone();
                Field::from_fn(move |x| c * f(x))
            }
        }
    }

    /// `x ↦ self(r·x + center)`.
    pub fn pulled_back(&self, center: Point, r: f64) -> Field {
        match &self.repr {
            Repr::Constant(_) => self.clone(),
            Repr::Func(f) => {
                let f = f.clone();
                Field::from_fn(move |y| f([r * y[0] + center[0], r * y[1] + center[1]]))
            }
        }
    }

    /// Centered finite-difference gradient.
    pub fn gradient(&self, x: Point, step: f64) -> [f64; 2] {
        if self.as_constant().is_some() {
            return [0.0, 0.0];
        }
        let dx = (self.eval([x[0] + step, x[1]]) - self.eval([x[0] - step, x[1]])) / (2.0 * step);
        let dy = (self.eval([x[0], x[1] + step]) - self.eval([x[0], x[1] - step])) / (2.0 * step);
        [dx, dy]
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.repr {
            Repr::Constant(c) => write!(f, "Field::Constant({c})"),
            Repr::Func(_) => f.write_str("Field::Func(..)"),
        }
    }
}

impl From<f64> for Field {
    fn from(c: f64) -> Self {
        Field::constant(c)
    }
}
