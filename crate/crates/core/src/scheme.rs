//! Monotone wide-stencil discretization of
//! `G_ε(x,u) = Φ(x,|ξ+Du|) F(D²u) − f − εu`.
//!
//! Second derivatives are taken along the directions of lattice frames
//! (pairs of orthogonal integer vectors). Arms that would leave the domain are
//! cut at the boundary, where the Dirichlet value is used, giving the usual
//! three-point formula with unequal spacing.
//!
//! The gradient enters through `Φ` only. To keep the scheme monotone for every
//! law, each power term `c t^p` of `Φ` sees an upwinded gradient magnitude
//! whose direction of monotonicity is chosen by the signs of `p` and of the
//! discrete operator value (see [`Discretization::node_residual`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::degeneracy::{pow, DegeneracyLaw, Terms};
use crate::geometry::{build_grid, ray_hit, BoundaryData, Domain, Grid, GridFunction, NodeKind};
use crate::operators::{eigen_sym, Extremum, OperatorKind, OperatorSpec, SymMatrix};
use crate::{Error, Field, Point, Result};

/// Orthogonal lattice frames `{(a,b), (−b,a)}` with `gcd(a,b) = 1`,
/// `a ≥ 1`, `0 ≤ b ≤ width`, sorted by the angle of `(a,b)` in `[0, π/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    width: usize,
    frames: Vec<[[i64; 2]; 2]>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Stencil {
    /// All lattice frames whose vectors have sup-norm at most `width`.
    /// Widths 1, 2, 3 give 2, 4, 8 frames.
    pub fn lattice(width: usize) -> Result<Self> {
        if width == 0 || width > 8 {
            return Err(Error::input(format!(
                "stencil width {width} must lie in 1..=8"
            )));
        }
        let w = width as i64;
        let mut vs = Vec::new();
        for a in 1..=w {
            for b in 0..=w {
                if gcd(a, b) == 1 {
                    vs.push([a, b]);
                }
            }
        }
        vs.sort_by(|p, q| {
            (p[1] as f64)
                .atan2(p[0] as f64)
                .total_cmp(&(q[1] as f64).atan2(q[0] as f64))
        });
        let frames = vs.into_iter().map(|v| [v, [-v[1], v[0]]]).collect();
        Ok(Stencil { width, frames })
    }

    /// The smallest lattice stencil with at least `m` frames.
    pub fn with_frames(m: usize) -> Result<Self> {
        for w in 1..=8 {
            let s = Stencil::lattice(w)?;
            if s.frames.len() >= m {
                return Ok(s);
            }
        }
        Err(Error::input(format!("no lattice stencil with {m} frames")))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn frames(&self) -> &[[[i64; 2]; 2]] {
        &self.frames
    }

    /// Unit vectors of each frame.
    pub fn unit_frames(&self) -> Vec<[Point; 2]> {
        self.frames
            .iter()
            .map(|f| {
                let unit = |v: [i64; 2]| {
                    let n = (v[0] as f64).hypot(v[1] as f64);
                    [v[0] as f64 / n, v[1] as f64 / n]
                };
                [unit(f[0]), unit(f[1])]
            })
            .collect()
    }

    /// Largest angular gap between consecutive frames (frames repeat every π/2).
    pub fn angular_resolution(&self) -> f64 {
        let angles: Vec<f64> = self
            .frames
            .iter()
            .map(|f| (f[0][1] as f64).atan2(f[0][0] as f64))
            .collect();
        let mut gap = std::f64::consts::FRAC_PI_2 - angles[angles.len() - 1] + angles[0];
        for w in angles.windows(2) {
            gap = gap.max(w[1] - w[0]);
        }
        gap
    }

    /// Directions in the order used by [`Discretization`]: `2f` and `2f+1` are
    /// the two vectors of frame `f`; frame 0 is the axis frame.
    fn directions(&self) -> Vec<[i64; 2]> {
        self.frames.iter().flat_map(|f| [f[0], f[1]]).collect()
    }
}

/// Regularization parameters of the discrete equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// Floor of the discrete gradient magnitude seen by `Φ`.
    pub eta: f64,
    /// Coefficient of the proper term `−εu`.
    pub epsilon: f64,
    /// Gradient shift `ξ`.
    pub xi: Point,
}

impl SchemeParams {
    pub fn new(eta: f64, epsilon: f64) -> Result<Self> {
        if !(eta > 0.0) || !(epsilon >= 0.0) {
            return Err(Error::input(format!(
                "need η > 0 and ε ≥ 0, got η = {eta}, ε = {epsilon}"
            )));
        }
        Ok(SchemeParams {
            eta,
            epsilon,
            xi: [0.0, 0.0],
        })
    }

    pub fn with_shift(mut self, xi: Point) -> Self {
        self.xi = xi;
        self
    }
}

/// The Dirichlet problem `Φ(x,|Du|) F(D²u) = f` in `Ω`, `u = g` on `∂Ω`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub domain: Domain,
    pub operator: OperatorSpec,
    pub law: DegeneracyLaw,
    pub f: Field,
    pub boundary: BoundaryData,
}

impl Problem {
    /// The problem satisfied by `−u` when `u` solves `self`: dual operator,
    /// data `−f`, `−g`.
    pub fn negated(&self) -> Problem {
        let mut boundary = self.boundary.clone();
        boundary.g = boundary.g.scaled(-1.0);
        Problem {
            domain: self.domain.clone(),
            operator: self.operator.dual(),
            law: self.law.clone(),
            f: self.f.scaled(-1.0),
            boundary,
        }
    }
}

const NONE: u32 = u32::MAX;

/// One arm of a second difference: either a grid node or a boundary point
/// carrying the Dirichlet value.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Arm {
    node: u32,
    len: f64,
    value: f64,
}

impl Arm {
    #[inline]
    fn read(&self, u: &[f64]) -> f64 {
        if self.node == NONE {
            self.value
        } else {
            u[self.node as usize]
        }
    }
}

/// Frame choice and weights `v_kᵀ A v_k` of a linear operator at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LinearWeights {
    frame: usize,
    w: [f64; 2],
}

/// A problem discretized on a grid: stencil arms, forcing and law terms are
/// precomputed per interior node.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub problem: Problem,
    pub grid: Grid,
    pub stencil: Stencil,
    ndir: usize,
    /// `2·ndir` arms per interior node: `+v` then `−v` for each direction.
    arms: Vec<Arm>,
    /// Interior slot of each active node.
    slot: Vec<u32>,
    forcing: Vec<f64>,
    terms: Vec<Terms>,
    linear: Vec<LinearWeights>,
    family_len: usize,
    /// `max over frames Σ_k 2/(a_k b_k)`.
    diag: Vec<f64>,
    /// `sqrt(Σ_axes 1/min(arm)²)`.
    grad_lip: Vec<f64>,
}

impl Discretization {
    pub fn new(problem: Problem, h: f64, stencil: Stencil) -> Result<Self> {
        let grid = build_grid(&problem.domain, h, stencil.width() + 1)?;
        let dirs = stencil.directions();
        let ndir = dirs.len();
        let interior = grid.interior().to_vec();
        let mut slot = vec![NONE; grid.len()];
        for (k, &a) in interior.iter().enumerate() {
            slot[a] = k as u32;
        }
        let mut arms = Vec::with_capacity(interior.len() * 2 * ndir);
        let g = &problem.boundary.g;
        for &a in &interior {
            let x = grid.point(a);
            let ij = grid.lattice(a);
            let dist = -grid.distance(a);
            for v in &dirs {
                for s in [1i64, -1] {
                    let step = [s * v[0], s * v[1]];
                    let dv = [step[0] as f64 * h, step[1] as f64 * h];
                    let full = dv[0].hypot(dv[1]);
                    let nb = grid.active_at([ij[0] + step[0], ij[1] + step[1]]);
                    let interior_nb = nb.filter(|&b| grid.kind(b) == NodeKind::Interior);
                    let hit = match interior_nb {
                        Some(_) if dist >= full => None,
                        Some(_) => ray_hit(&problem.domain, x, dv, 1.0),
                        None => Some(ray_hit(&problem.domain, x, dv, 1e6).ok_or_else(|| {
                            Error::Resolution(format!("arm from {x:?} never meets ∂Ω"))
                        })?),
                    };
                    arms.push(match hit {
                        None => Arm {
                            node: interior_nb.unwrap() as u32,
                            len: full,
                            value: 0.0,
                        },
                        Some((t, _)) => {
                            let z = [x[0] + t * dv[0], x[1] + t * dv[1]];
                            Arm {
                                node: NONE,
                                len: t * full,
                                value: g.eval(z),
                            }
                        }
                    });
                }
            }
        }
        let forcing = interior
            .iter()
            .map(|&a| problem.f.eval(grid.point(a)))
            .collect();
        let terms = interior
            .iter()
            .map(|&a| problem.law.terms(grid.point(a)))
            .collect();
        let units = stencil.unit_frames();
        let family: Vec<Box<dyn Fn(Point) -> SymMatrix>> = match &problem.operator.kind {
            OperatorKind::LinearTrace(c) => {
                let c = c.clone();
                vec![Box::new(move |x: Point| c.at(&x))]
            }
            OperatorKind::InfSupOfLinear { family, .. } => family
                .iter()
                .cloned()
                .map(|m| Box::new(move |_: Point| m.clone()) as Box<dyn Fn(Point) -> SymMatrix>)
                .collect(),
            _ => Vec::new(),
        };
        let mut linear = Vec::with_capacity(interior.len() * family.len());
        for &a in &interior {
            for coef in &family {
                linear.push(select_frame(&coef(grid.point(a)), &units)?);
            }
        }
        let mut d = Discretization {
            problem,
            grid,
            stencil,
            ndir,
            arms,
            slot,
            forcing,
            terms,
            linear,
            family_len: family.len(),
            diag: Vec::new(),
            grad_lip: Vec::new(),
        };
        let n = d.interior_len();
        d.diag = (0..n)
            .map(|k| {
                (0..d.ndir / 2)
                    .map(|f| {
                        (0..2)
                            .map(|j| {
                                let (p, m) = d.arm_pair(k, 2 * f + j);
                                2.0 / (p.len * m.len)
                            })
                            .sum::<f64>()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        d.grad_lip = (0..n)
            .map(|k| {
                (0..2)
                    .map(|e| {
                        let (p, m) = d.arm_pair(k, e);
                        p.len.min(m.len).powi(-2)
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        Ok(d)
    }

    pub fn h(&self) -> f64 {
        self.grid.h
    }

    /// Number of interior nodes (unknowns).
    pub fn interior_len(&self) -> usize {
        self.forcing.len()
    }

    /// Active index of interior slot `k`.
    #[inline]
    pub fn node(&self, k: usize) -> usize {
        self.grid.interior()[k]
    }

    /// Interior slot of an active node.
    pub fn slot(&self, active: usize) -> Option<usize> {
        let s = self.slot[active];
        (s != NONE).then_some(s as usize)
    }

    #[inline]
    fn arm_pair(&self, k: usize, dir: usize) -> (&Arm, &Arm) {
        let base = (k * self.ndir + dir) * 2;
        (&self.arms[base], &self.arms[base + 1])
    }

    /// Active indices of the grid neighbours entering the stencil at slot `k`.
    pub fn neighbours(&self, k: usize) -> Vec<usize> {
        let base = k * self.ndir * 2;
        let mut out: Vec<usize> = self.arms[base..base + 2 * self.ndir]
            .iter()
            .filter(|a| a.node != NONE)
            .map(|a| a.node as usize)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether every arm at slot `k` ends on a grid node.
    pub fn is_uncut(&self, k: usize) -> bool {
        let base = k * self.ndir * 2;
        self.arms[base..base + 2 * self.ndir]
            .iter()
            .all(|a| a.node != NONE)
    }

    /// Shortest arm at slot `k`.
    pub fn min_arm(&self, k: usize) -> f64 {
        let base = k * self.ndir * 2;
        self.arms[base..base + 2 * self.ndir]
            .iter()
            .map(|a| a.len)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn forcing(&self, k: usize) -> f64 {
        self.forcing[k]
    }

    /// Second difference along direction `dir` at slot `k`, with the center
    /// value `c`.
    #[inline]
    fn second_diff(&self, k: usize, dir: usize, u: &[f64], c: f64) -> f64 {
        let (p, m) = self.arm_pair(k, dir);
        let (a, b) = (p.len, m.len);
        2.0 / (a + b) * ((p.read(u) - c) / a + (m.read(u) - c) / b)
    }

    /// Second difference of `u` at active node `node` along stencil direction
    /// `dir` (frame `dir / 2`, vector `dir % 2`), normalized to a unit vector.
    pub fn second_difference(&self, u: &GridFunction, node: usize, dir: usize) -> Result<f64> {
        let k = self
            .slot(node)
            .ok_or_else(|| Error::input("second difference at a non-interior node"))?;
        if dir >= self.ndir {
            return Err(Error::input(format!("direction {dir} outside the stencil")));
        }
        Ok(self.second_diff(k, dir, &u.values, u.values[node]))
    }

    /// `F_h` at slot `k` with center value `c`.
    fn discrete_f_at(&self, k: usize, u: &[f64], c: f64) -> f64 {
        let e = self.problem.operator.ellipticity;
        let (lo, hi) = (e.lambda(), e.big_lambda());
        let frames = self.ndir / 2;
        match &self.problem.operator.kind {
            OperatorKind::PucciPlus => (0..frames)
                .map(|f| {
                    (0..2)
                        .map(|j| {
                            let d = self.second_diff(k, 2 * f + j, u, c);
                            if d > 0.0 {
                                hi * d
                            } else {
                                lo * d
                            }
                        })
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max),
            OperatorKind::PucciMinus => (0..frames)
                .map(|f| {
                    (0..2)
                        .map(|j| {
                            let d = self.second_diff(k, 2 * f + j, u, c);
                            if d > 0.0 {
                                lo * d
                            } else {
                                hi * d
                            }
                        })
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min),
            OperatorKind::LinearTrace(_) => self.linear_value(k, 0, u, c),
            OperatorKind::InfSupOfLinear { mode, .. } => {
                let vals = (0..self.family_len).map(|m| self.linear_value(k, m, u, c));
                match mode {
                    Extremum::Sup => vals.fold(f64::NEG_INFINITY, f64::max),
                    Extremum::Inf => vals.fold(f64::INFINITY, f64::min),
                }
            }
        }
    }

    #[inline]
    fn linear_value(&self, k: usize, member: usize, u: &[f64], c: f64) -> f64 {
        let lw = self.linear[k * self.family_len + member];
        lw.w[0] * self.second_diff(k, 2 * lw.frame, u, c)
            + lw.w[1] * self.second_diff(k, 2 * lw.frame + 1, u, c)
    }

    /// Discrete operator `F_h(u)` at an interior node.
    pub fn discrete_f(&self, u: &GridFunction, node: usize) -> Result<f64> {
        let k = self
            .slot(node)
            .ok_or_else(|| Error::input("operator at a non-interior node"))?;
        Ok(self.discrete_f_at(k, &u.values, u.values[node]))
    }

    /// Second-order centered gradient (unequal arms near the boundary).
    pub fn discrete_gradient(&self, u: &GridFunction, node: usize) -> Result<Point> {
        let k = self
            .slot(node)
            .ok_or_else(|| Error::input("gradient at a non-interior node"))?;
        let c = u.values[node];
        let mut g = [0.0; 2];
        for (e, ge) in g.iter_mut().enumerate() {
            let (p, m) = self.arm_pair(k, e);
            let (a, b) = (p.len, m.len);
            let (up, um) = (p.read(&u.values), m.read(&u.values));
            *ge = (b * b * (up - c) - a * a * (um - c)) / (a * b * (a + b));
        }
        Ok(g)
    }

    /// Upwinded gradient magnitudes `(G₊, G₋)` at slot `k`: `G₊` is
    /// nondecreasing in the neighbour values and nonincreasing in the center,
    /// `G₋` the reverse. Both are consistent with `|ξ + Du|`.
    #[inline]
    fn gradient_magnitudes(&self, k: usize, u: &[f64], c: f64, xi: Point) -> (f64, f64) {
        let (mut gp, mut gm) = (0.0, 0.0);
        for e in 0..2 {
            let (p, m) = self.arm_pair(k, e);
            let fwd = (p.read(u) - c) / p.len + xi[e];
            // the backward arm points along −e
            let bwd = (c - m.read(u)) / m.len + xi[e];
            let a = fwd.max(-bwd).max(0.0);
            let b = bwd.max(-fwd).max(0.0);
            gp += a * a;
            gm += b * b;
        }
        (gp.sqrt(), gm.sqrt())
    }

    /// `Φ` evaluated term by term on the upwinded magnitudes for an operator
    /// value of sign `f_nonneg`.
    #[inline]
    fn weight(&self, k: usize, gp: f64, gm: f64, f_nonneg: bool, eta: f64) -> f64 {
        self.terms[k]
            .iter()
            .map(|(c, p)| {
                if p == 0.0 {
                    c
                } else {
                    let g = if (p > 0.0) == f_nonneg { gp } else { gm };
                    c * pow(g.max(eta), p)
                }
            })
            .sum()
    }

    /// Residual at slot `k` when the center takes the value `c` and all other
    /// nodes the values in `u`.
    ///
    /// With `F = F_h`, each term `c t^p` of `Φ` is evaluated at `G₊` when
    /// `p·F ≥ 0` and at `G₋` otherwise, which makes `Φ·F` nondecreasing in the
    /// neighbours and nonincreasing in the center.
    #[inline]
    pub(crate) fn node_residual(&self, k: usize, u: &[f64], c: f64, params: &SchemeParams) -> f64 {
        let f = self.discrete_f_at(k, u, c);
        let (gp, gm) = self.gradient_magnitudes(k, u, c, params.xi);
        self.weight(k, gp, gm, f >= 0.0, params.eta) * f - self.forcing[k] - params.epsilon * c
    }

    /// Upper bound for `|∂ residual / ∂ center|` at slot `k`, used for the
    /// pseudo-time step.
    pub(crate) fn center_derivative_bound(
        &self,
        k: usize,
        u: &[f64],
        c: f64,
        params: &SchemeParams,
    ) -> f64 {
        let f = self.discrete_f_at(k, u, c);
        let (gp, gm) = self.gradient_magnitudes(k, u, c, params.xi);
        let (g_lo, g_hi) = (gp.min(gm).max(params.eta), gp.max(gm).max(params.eta));
        let big = self.problem.operator.ellipticity.big_lambda();
        let mut phi = 0.0;
        let mut dphi = 0.0;
        for (cf, p) in self.terms[k].iter() {
            if p == 0.0 {
                phi += cf;
                continue;
            }
            phi += cf * pow(if p > 0.0 { g_hi } else { g_lo }, p);
            dphi += (cf * p).abs() * pow(if p >= 1.0 { g_hi } else { g_lo }, p - 1.0);
        }
        phi * big * self.diag[k] + dphi * f.abs() * self.grad_lip[k] + params.epsilon
    }

    /// Residual `G_ε` at every interior node, in slot order.
    pub fn residual(&self, u: &GridFunction, params: &SchemeParams) -> Vec<f64> {
        use rayon::prelude::*;
        (0..self.interior_len())
            .into_par_iter()
            .map(|k| self.node_residual(k, &u.values, u.values[self.node(k)], params))
            .collect()
    }

    /// The discretization of the negated problem (dual operator, `−f`, `−g`)
    /// on the same grid; `u` solves `self` iff `−u` solves the result.
    pub fn negated(&self) -> Discretization {
        let mut d = self.clone();
        d.problem = self.problem.negated();
        for a in d.arms.iter_mut() {
            a.value = -a.value;
        }
        for f in d.forcing.iter_mut() {
            *f = -*f;
        }
        d
    }

    /// Lattice coordinates of interior slot `k`.
    pub fn lattice(&self, k: usize) -> [i64; 2] {
        self.grid.lattice(self.node(k))
    }

    /// `u` with band nodes set to the boundary data and interior nodes to `init`.
    pub fn grid_function(&self, init: impl Fn(Point) -> f64) -> GridFunction {
        let mut u = GridFunction::from_fn(&self.grid, init);
        u.impose_boundary(&self.grid, &self.problem.boundary);
        u
    }
}

/// Chooses the frame in which `A` is closest to diagonal and returns the
/// diagonal entries `v_kᵀ A v_k` there.
fn select_frame(a: &SymMatrix, units: &[[Point; 2]]) -> Result<LinearWeights> {
    if a.dim() != 2 {
        return Err(Error::input("linear coefficients must be 2×2"));
    }
    let eig = eigen_sym(a)?;
    if eig.values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::input("linear coefficient is not positive definite"));
    }
    let q = |v: Point, w: Point| {
        a.get(0, 0) * v[0] * w[0]
            + a.get(0, 1) * (v[0] * w[1] + v[1] * w[0])
            + a.get(1, 1) * v[1] * w[1]
    };
    let mut best = (f64::INFINITY, 0usize);
    for (f, fr) in units.iter().enumerate() {
        let off = q(fr[0], fr[1]).abs();
        if off < best.0 - 1e-14 * a.frobenius() {
            best = (off, f);
        }
    }
    let fr = units[best.1];
    Ok(LinearWeights {
        frame: best.1,
        w: [q(fr[0], fr[0]), q(fr[1], fr[1])],
    })
}

/// Outcome of [`monotonicity_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest violation relative to the residual scale.
    pub worst: f64,
}

/// Randomized check of discrete degenerate ellipticity: raising any stencil
/// neighbour must not decrease the residual at the center, raising the center
/// must decrease it by at least `ε` times the increment.
pub fn monotonicity_check(
    law: &DegeneracyLaw,
    spec: &OperatorSpec,
    params: &SchemeParams,
    trials: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if trials == 0 {
        return Err(Error::input("monotonicity check needs at least one trial"));
    }
    let problem = Problem {
        domain: Domain::ball([0.0, 0.0], 1.0)?,
        operator: spec.clone(),
        law: law.clone(),
        f: Field::constant(0.0),
        boundary: BoundaryData::new(Field::from_fn(|x| x[0] * x[1]), 0.5)?,
    };
    let disc = Discretization::new(problem, 0.125, Stencil::lattice(3)?)?;
    monotonicity_check_on(&disc, params, trials, seed)
}

/// [`monotonicity_check`] on a given discretization.
pub fn monotonicity_check_on(
    disc: &Discretization,
    params: &SchemeParams,
    trials: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = disc.interior_len();
    let mut report = MonotonicityReport {
        trials,
        violations: 0,
        worst: 0.0,
    };
    let mut u = vec![0.0; disc.grid.len()];
    for t in 0..trials {
        // Alternate smooth, rough and nearly flat fields so that the operator
        // value and the gradient cross zero frequently.
        let amp = 10f64.powf(rng.gen_range(-4.0..1.0));
        let (a, b, c) = (
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        for (i, v) in u.iter_mut().enumerate() {
            let x = disc.grid.point(i);
            *v = match t % 3 {
                0 => {
                    amp * (a * x[0] * x[0] + b * x[0] * x[1] + c * x[1] * x[1])
                        + rng.gen_range(-1e-3..1e-3) * amp
                }
                1 => amp * rng.gen_range(-1.0..1.0),
                _ => amp * 1e-4 * rng.gen_range(-1.0..1.0),
            };
        }
        let k = rng.gen_range(0..n);
        let center = disc.node(k);
        let nbs = disc.neighbours(k);
        let bump = 10f64.powf(rng.gen_range(-8.0..0.0)) * amp.max(1e-3);
        let r0 = disc.node_residual(k, &u, u[center], params);
        let scale = 1.0 + r0.abs();
        let tol = 1e-9 * scale;
        if !nbs.is_empty() && rng.gen_bool(0.75) {
            let j = nbs[rng.gen_range(0..nbs.len())];
            let old = u[j];
            u[j] += bump;
            let r1 = disc.node_residual(k, &u, u[center], params);
            u[j] = old;
            if r1 < r0 - tol {
                report.violations += 1;
                report.worst = report.worst.max((r0 - r1) / scale);
            }
        } else {
            let r1 = disc.node_residual(k, &u, u[center] + bump, params);
            let need = params.epsilon * bump * (1.0 - 1e-9);
            if r0 - r1 < need - tol {
                report.violations += 1;
                report.worst = report.worst.max((need - (r0 - r1)) / scale);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{pucci_plus, EllipticityPair};

    fn disc_with(
        spec: OperatorSpec,
        law: DegeneracyLaw,
        g: Field,
        h: f64,
        width: usize,
    ) -> Discretization {
        let problem = Problem {
            domain: Domain::ball([0.0, 0.0], 1.0).unwrap(),
            operator: spec,
            law,
            f: Field::constant(1.0),
            boundary: BoundaryData::new(g, 0.5).unwrap(),
        };
        Discretization::new(problem, h, Stencil::lattice(width).unwrap()).unwrap()
    }

    fn pair(l: f64, big: f64) -> EllipticityPair {
        EllipticityPair::new(l, big).unwrap()
    }

    #[test]
    fn lattice_frames() {
        for (w, m) in [(1, 2), (2, 4), (3, 8)] {
            let s = Stencil::lattice(w).unwrap();
            assert_eq!(s.frames().len(), m);
            assert_eq!(s.frames()[0], [[1, 0], [0, 1]]);
            for f in s.unit_frames() {
                let dot = f[0][0] * f[1][0] + f[0][1] * f[1][1];
                assert!(dot.abs() < 1e-12);
                assert!((f[0][0].hypot(f[0][1]) - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(Stencil::with_frames(8).unwrap().width(), 3);
        assert!(
            Stencil::lattice(3).unwrap().angular_resolution()
                < Stencil::lattice(1).unwrap().angular_resolution()
        );
    }

    #[test]
    fn quadratics_are_exact() {
        let g = Field::from_fn(|x| x[0] * x[0] + x[1] * x[1]);
        let d = disc_with(
            OperatorSpec::laplacian(2),
            DegeneracyLaw::power(0.0).unwrap(),
            g.clone(),
            0.1,
            3,
        );
        let u = d.grid_function(|x| g.eval(x));
        for &a in d.grid.interior() {
            for dir in 0..16 {
                assert!((d.second_difference(&u, a, dir).unwrap() - 2.0).abs() < 1e-9);
            }
        }
        let aff = Field::from_fn(|x| 1.0 + 2.0 * x[0] - 3.0 * x[1]);
        let d = disc_with(
            OperatorSpec::laplacian(2),
            DegeneracyLaw::power(0.0).unwrap(),
            aff.clone(),
            0.1,
            3,
        );
        let u = d.grid_function(|x| aff.eval(x));
        for &a in d.grid.interior() {
            assert!(d.discrete_f(&u, a).unwrap().abs() < 1e-9);
            let gr = d.discrete_gradient(&u, a).unwrap();
            assert!((gr[0] - 2.0).abs() < 1e-9 && (gr[1] + 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mixed_derivative_along_diagonal() {
        let g = Field::from_fn(|x| x[0] * x[1]);
        let d = disc_with(
            OperatorSpec::laplacian(2),
            DegeneracyLaw::power(0.0).unwrap(),
            g.clone(),
            0.05,
            2,
        );
        let u = d.grid_function(|x| g.eval(x));
        let o = d.grid.active_at([0, 0]).unwrap();
        // frame 1 of width 2 is ((2,1),(−1,2)); frame with (1,1) is index 2
        let f = d
            .stencil
            .frames()
            .iter()
            .position(|f| f[0] == [1, 1])
            .unwrap();
        assert!((d.second_difference(&u, o, 2 * f).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pucci_examples() {
        let e = pair(1.0, 2.0);
        let half = Field::from_fn(|x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let d = disc_with(
            OperatorSpec::pucci_plus(e),
            DegeneracyLaw::power(0.0).unwrap(),
            half.clone(),
            0.1,
            3,
        );
        let u = d.grid_function(|x| half.eval(x));
        let saddle = Field::from_fn(|x| 0.5 * (x[0] * x[0] - x[1] * x[1]));
        let d2 = disc_with(
            OperatorSpec::pucci_plus(e),
            DegeneracyLaw::power(0.0).unwrap(),
            saddle.clone(),
            0.1,
            3,
        );
        let v = d2.grid_function(|x| saddle.eval(x));
        for &a in d.grid.interior() {
            assert!((d.discrete_f(&u, a).unwrap() - 4.0).abs() < 1e-9);
            assert!((d2.discrete_f(&v, a).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn frame_refinement_never_hurts() {
        let e = pair(0.5, 2.0);
        let m = SymMatrix::from_rows(2, &[0.3, 0.8, 0.8, -1.1]).unwrap();
        let exact = pucci_plus(&m, e).unwrap();
        let q = Field::from_fn(move |x| {
            0.5 * (0.3 * x[0] * x[0] + 1.6 * x[0] * x[1] - 1.1 * x[1] * x[1])
        });
        let mut prev = f64::INFINITY;
        for w in 1..=4 {
            let d = disc_with(
                OperatorSpec::pucci_plus(e),
                DegeneracyLaw::power(0.0).unwrap(),
                q.clone(),
                0.05,
                w,
            );
            let u = d.grid_function(|x| q.eval(x));
            let o = d.grid.active_at([0, 0]).unwrap();
            let err = (d.discrete_f(&u, o).unwrap() - exact).abs();
            assert!(err <= prev + 1e-12, "width {w}: {err} > {prev}");
            prev = err;
        }
    }

    #[test]
    fn residual_examples() {
        let p = SchemeParams::new(1e-8, 0.0).unwrap();
        let exact = Field::from_fn(|x| (x[0] * x[0] + x[1] * x[1] - 1.0) / 4.0);
        let d = disc_with(
            OperatorSpec::laplacian(2),
            DegeneracyLaw::power(0.0).unwrap(),
            Field::constant(0.0),
            0.05,
            1,
        );
        let u = d.grid_function(|x| exact.eval(x));
        let r = d.residual(&u, &p);
        for (k, rk) in r.iter().enumerate() {
            if d.is_uncut(k) {
                assert!(rk.abs() < 1e-10);
            } else {
                // the data g = 0 agrees with the exact solution on ∂Ω
                assert!(rk.abs() < 1e-8, "{rk}");
            }
        }
        let zero = Problem {
            f: Field::constant(0.0),
            boundary: BoundaryData::new(Field::constant(1.0), 0.5).unwrap(),
            ..d.problem.clone()
        };
        let dz = Discretization::new(zero, 0.1, Stencil::lattice(1).unwrap()).unwrap();
        let one = dz.grid_function(|_| 1.0);
        let pe = SchemeParams::new(1e-8, 0.5).unwrap();
        assert!(dz
            .residual(&one, &pe)
            .iter()
            .all(|r| (r + 0.5).abs() < 1e-12));
    }

    #[test]
    fn monotone_for_builtin_pairs() {
        let e = pair(0.5, 2.0);
        let specs = [
            OperatorSpec::pucci_plus(e),
            OperatorSpec::pucci_minus(e),
            OperatorSpec::laplacian(2),
        ];
        let laws = [
            DegeneracyLaw::power(0.0).unwrap(),
            DegeneracyLaw::power(2.0).unwrap(),
            DegeneracyLaw::power(-0.5).unwrap(),
        ];
        for s in &specs {
            for l in &laws {
                for eps in [0.0, 0.1] {
                    let p = SchemeParams::new(1e-6, eps).unwrap();
                    let rep = monotonicity_check(l, s, &p, 2000, 7).unwrap();
                    assert_eq!(rep.violations, 0, "{:?} {:?} {rep:?}", s.kind, l.kind());
                }
            }
        }
    }

    #[test]
    fn center_bump_drops_by_epsilon() {
        let d = disc_with(
            OperatorSpec::laplacian(2),
            DegeneracyLaw::power(0.0).unwrap(),
            Field::constant(0.0),
            0.1,
            1,
        );
        let p = SchemeParams::new(1e-8, 0.1).unwrap();
        let u = vec![0.0; d.grid.len()];
        let r0 = d.node_residual(0, &u, 0.0, &p);
        let r1 = d.node_residual(0, &u, 1.0, &p);
        assert!(r0 - r1 >= 0.1 * (1.0 - 1e-12));
    }
}
