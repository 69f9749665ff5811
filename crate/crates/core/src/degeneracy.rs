//! Gradient weights `Φ(x,t)`, their structural constants and the rescalings
//! used by the boundary regularity theory.
//!
//! Every built-in law is a sum of at most two power terms `c_k(x) t^{p_k(x)}`
//! with `c_k ≥ 0`, possibly viewed through a chart `y ↦ r y + x₀`,
//! `t ↦ s t` and normalized so that the weight equals 1 at `t = 1`. The scheme
//! relies on that representation to upwind each term separately.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Field, Point, Result};

#[derive(Debug, Clone)]
pub enum LawKind {
    /// `t^p`.
    Power { p: f64 },
    /// `t^p + a(x) t^q` with `p ≤ q`, `a ≥ 0`.
    DoublePhase { p: f64, q: f64, a: Field },
    /// `t^{p(x)}`.
    VariableExponent { p: Field },
}

/// `Φ(y,t) = Φ₀(r y + center, s t) / Φ₀(r y + center, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Chart {
    center: Point,
    r: f64,
    t_scale: f64,
}

impl Chart {
    fn then(self, inner: Chart) -> Chart {
        // self applied to a law already carrying `inner`.
        Chart {
            center: [
                inner.r * self.center[0] + inner.center[0],
                inner.r * self.center[1] + inner.center[1],
            ],
            r: inner.r * self.r,
            t_scale: inner.t_scale * self.t_scale,
        }
    }

    #[inline]
    fn map(&self, y: Point) -> Point {
        [
            self.r * y[0] + self.center[0],
            self.r * y[1] + self.center[1],
        ]
    }
}

/// Power-term expansion `Σ_k c_k t^{p_k}` of a law at a fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terms {
    len: usize,
    coef: [f64; 2],
    exp: [f64; 2],
}

impl Terms {
    fn one(c: f64, p: f64) -> Self {
        Terms {
            len: 1,
            coef: [c, 0.0],
            exp: [p, 0.0],
        }
    }

    fn two(c0: f64, p0: f64, c1: f64, p1: f64) -> Self {
        Terms {
            len: 2,
            coef: [c0, c1],
            exp: [p0, p1],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len).map(move |k| (self.coef[k], self.exp[k]))
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.iter().map(|(c, p)| c * pow(t, p)).sum()
    }

    /// `Φ(t) / t^q`, evaluated term by term.
    pub fn ratio(&self, t: f64, q: f64) -> f64 {
        self.iter().map(|(c, p)| c * pow(t, p - q)).sum()
    }

    /// `|∂_t Φ(t)|` bounded term by term.
    pub fn abs_derivative(&self, t: f64) -> f64 {
        self.iter()
            .filter(|(_, p)| *p != 0.0)
            .map(|(c, p)| (c * p).abs() * pow(t, p - 1.0))
            .sum()
    }
}

/// `t^p` with `t^0 = 1` for every `t ≥ 0`.
#[inline]
pub fn pow(t: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if p == 1.0 {
        t
    } else if p == 2.0 {
        t * t
    } else {
        t.powf(p)
    }
}

/// A gradient weight with its declared indices `i(Φ) ≤ s(Φ)`, almost
/// monotonicity constant `L ≥ 1` and normalization bounds `ν₀ ≤ Φ(x,1) ≤ ν₁`.
#[derive(Debug, Clone)]
pub struct DegeneracyLaw {
    kind: LawKind,
    chart: Option<Chart>,
    pub i_phi: f64,
    pub s_phi: f64,
    pub l: f64,
    pub nu0: f64,
    pub nu1: f64,
}

impl DegeneracyLaw {
    /// Builds a law with explicitly declared constants. The declaration is
    /// not checked against the law here; see [`check_a2`].
    pub fn declared(
        kind: LawKind,
        i_phi: f64,
        s_phi: f64,
        l: f64,
        nu0: f64,
        nu1: f64,
    ) -> Result<Self> {
        if !(i_phi > -1.0) || !(s_phi >= i_phi) || !(l >= 1.0) || !(nu0 > 0.0) || !(nu1 >= nu0) {
            return Err(Error::input(format!(
                "invalid law constants: i = {i_phi}, s = {s_phi}, L = {l}, ν₀ = {nu0}, ν₁ = {nu1}"
            )));
        }
        Ok(DegeneracyLaw {
            kind,
            chart: None,
            i_phi,
            s_phi,
            l,
            nu0,
            nu1,
        })
    }

    pub fn power(p: f64) -> Result<Self> {
        Self::declared(LawKind::Power { p }, p, p, 1.0, 1.0, 1.0)
    }

    /// `t^p + a(x) t^q`; `ν₀`, `ν₁` are the extremes of `1 + a` over `samples`
    /// (exact for constant `a`).
    pub fn double_phase(p: f64, q: f64, a: Field, samples: &[Point]) -> Result<Self> {
        if q < p {
            return Err(Error::input("double phase requires p ≤ q"));
        }
        let (lo, hi) = field_range(&a, samples);
        if !(lo >= 0.0) {
            return Err(Error::input(
                "double phase coefficient must be non-negative",
            ));
        }
        Self::declared(
            LawKind::DoublePhase { p, q, a },
            p,
            q,
            1.0,
            1.0 + lo,
            1.0 + hi,
        )
    }

    /// `t^{p(x)}` with `i = inf p`, `s = sup p` over `samples`.
    pub fn variable_exponent(p: Field, samples: &[Point]) -> Result<Self> {
        let (lo, hi) = field_range(&p, samples);
        Self::declared(LawKind::VariableExponent { p }, lo, hi, 1.0, 1.0, 1.0)
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn is_normalized(&self) -> bool {
        self.chart.is_some() || matches!(self.kind, LawKind::Power { .. })
    }

    /// `Some(p)` when the law is exactly `t^p` everywhere.
    pub fn as_power(&self) -> Option<f64> {
        match self.kind {
            LawKind::Power { p } => Some(p),
            LawKind::VariableExponent { ref p } => p.as_constant(),
            _ => None,
        }
    }

    /// True when `Φ ≡ 1`.
    pub fn is_constant_one(&self) -> bool {
        self.as_power() == Some(0.0)
    }

    fn base_terms(&self, x: Point) -> Terms {
        match &self.kind {
            LawKind::Power { p } => Terms::one(1.0, *p),
            LawKind::DoublePhase { p, q, a } => Terms::two(1.0, *p, a.eval(x), *q),
            LawKind::VariableExponent { p } => Terms::one(1.0, p.eval(x)),
        }
    }

    /// The power-term expansion of `t ↦ Φ(x, t)`.
    pub fn terms(&self, x: Point) -> Terms {
        match self.chart {
            None => self.base_terms(x),
            Some(ch) => {
                let mut t = self.base_terms(ch.map(x));
                let mut norm = 0.0;
                for k in 0..t.len {
                    t.coef[k] *= pow(ch.t_scale, t.exp[k]);
                    norm += t.coef[k];
                }
                for k in 0..t.len {
                    t.coef[k] /= norm;
                }
                t
            }
        }
    }

    pub fn eval(&self, x: Point, t: f64) -> Result<f64> {
        phi_eval(self, x, t)
    }

    fn with_chart(&self, chart: Chart) -> DegeneracyLaw {
        let mut out = self.clone();
        if matches!(self.kind, LawKind::Power { .. }) {
            out.chart = None;
        } else {
            out.chart = Some(match self.chart {
                None => chart,
                Some(inner) => chart.then(inner),
            });
        }
        out.nu0 = 1.0;
        out.nu1 = 1.0;
        out
    }
}

fn field_range(f: &Field, samples: &[Point]) -> (f64, f64) {
    if let Some(c) = f.as_constant() {
        return (c, c);
    }
    samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            let v = f.eval(x);
            (lo.min(v), hi.max(v))
        })
}

/// `Φ(x,t)`; singular laws return `+∞` at `t = 0`.
pub fn phi_eval(law: &DegeneracyLaw, x: Point, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::input(format!("Φ evaluated at negative t = {t}")));
    }
    Ok(law.terms(x).eval(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct A2Report {
    pub checks: usize,
    pub monotonicity_violations: usize,
    pub normalization_violations: usize,
}

impl A2Report {
    pub fn passed(&self) -> bool {
        self.monotonicity_violations == 0 && self.normalization_violations == 0
    }
}

/// Samples the almost-monotonicity and normalization conditions on `Φ`.
///
/// For every point in `xs`, draws `t_pairs` pairs `t₁ < t₂` log-uniformly in
/// `[1e-6, 1e6]` and checks `Φ(t₂)/t₂^i ≥ L⁻¹ Φ(t₁)/t₁^i` and
/// `Φ(t₂)/t₂^s ≤ L Φ(t₁)/t₁^s`, with `L` relaxed by a factor `1 + 1e-10`.
pub fn check_a2(law: &DegeneracyLaw, xs: &[Point], t_pairs: usize, seed: u64) -> Result<A2Report> {
    if xs.is_empty() || t_pairs == 0 {
        return Err(Error::input(
            "check_a2 needs at least one point and one pair",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = law.l * (1.0 + 1e-10);
    let mut report = A2Report::default();
    for &x in xs {
        let terms = law.terms(x);
        let at_one = terms.eval(1.0);
        if at_one < law.nu0 * (1.0 - 1e-12) || at_one > law.nu1 * (1.0 + 1e-12) {
            report.normalization_violations += 1;
        }
        for _ in 0..t_pairs {
            let a = 10f64.powf(rng.gen_range(-6.0..6.0));
            let b = 10f64.powf(rng.gen_range(-6.0..6.0));
            let (t1, t2) = if a < b { (a, b) } else { (b, a) };
            report.checks += 1;
            let lower_ok = terms.ratio(t2, law.i_phi) * l >= terms.ratio(t1, law.i_phi);
            let upper_ok = terms.ratio(t2, law.s_phi) <= l * terms.ratio(t1, law.s_phi);
            if !(lower_ok && upper_ok) {
                report.monotonicity_violations += 1;
            }
        }
    }
    Ok(report)
}

/// Result of `Φ̃(x,t) = t^{-i(Φ)} Φ(x,t)`: the equation `Φ F(D²u) = f` becomes
/// `Φ̃ F(D²u) = |Du|^{-i(Φ)} f`.
#[derive(Debug, Clone)]
pub struct SingularTransform {
    pub law: DegeneracyLaw,
    /// Exponent `e` of the forcing multiplier `|Du|^e`.
    pub gradient_exponent: f64,
}

impl SingularTransform {
    pub fn forcing_multiplier(&self, grad_norm: f64) -> f64 {
        pow(grad_norm, self.gradient_exponent)
    }
}

pub fn transform_singular_to_degenerate(law: &DegeneracyLaw) -> SingularTransform {
    let shift = -law.i_phi;
    let kind = match &law.kind {
        LawKind::Power { p } => LawKind::Power { p: p + shift },
        LawKind::DoublePhase { p, q, a } => LawKind::DoublePhase {
            p: p + shift,
            q: q + shift,
            a: a.clone(),
        },
        LawKind::VariableExponent { p } => LawKind::VariableExponent {
            p: p.shifted(shift),
        },
    };
    SingularTransform {
        law: DegeneracyLaw {
            kind,
            chart: law.chart,
            i_phi: 0.0,
            s_phi: law.s_phi - law.i_phi,
            l: law.l,
            nu0: law.nu0,
            nu1: law.nu1,
        },
        gradient_exponent: shift,
    }
}

/// `Φ̄(y,t) = Φ(r y + x₀, (K/r) t) / Φ(r y + x₀, K/r)`.
pub fn rescale_smallness(law: &DegeneracyLaw, x0: Point, r: f64, k: f64) -> Result<DegeneracyLaw> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::input(format!(
            "rescaling radius r = {r} must lie in (0, 1]"
        )));
    }
    if !(k >= 1.0) {
        return Err(Error::input(format!(
            "rescaling factor K = {k} must be ≥ 1"
        )));
    }
    Ok(law.with_chart(Chart {
        center: x0,
        r,
        t_scale: k / r,
    }))
}

/// `Φ_k(y,t) = Φ(ρ^k y + c, ρ^{kα} t) / Φ(ρ^k y + c, ρ^{kα})`.
pub fn rescale_iterate(
    law: &DegeneracyLaw,
    rho: f64,
    k: u32,
    alpha: f64,
    center: Point,
) -> Result<DegeneracyLaw> {
    if !(rho > 0.0 && rho < 0.5) {
        return Err(Error::input(format!("ρ = {rho} must lie in (0, 1/2)")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::input(format!("α = {alpha} must lie in (0, 1)")));
    }
    let r = rho.powi(k as i32);
    Ok(law.with_chart(Chart {
        center,
        r,
        t_scale: r.powf(alpha),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_points() -> Vec<Point> {
        let mut v = Vec::new();
        for i in -3..=3 {
            for j in -3..=3 {
                v.push([i as f64 / 3.0, j as f64 / 3.0]);
            }
        }
        v
    }

    #[test]
    fn evaluation_examples() {
        let p2 = DegeneracyLaw::power(2.0).unwrap();
        assert_eq!(phi_eval(&p2, [0.3, 0.1], 3.0).unwrap(), 9.0);
        let dp = DegeneracyLaw::double_phase(1.0, 2.0, Field::constant(1.0), &[]).unwrap();
        assert_eq!(phi_eval(&dp, [0.0, 0.0], 2.0).unwrap(), 6.0);
        let p0 = DegeneracyLaw::power(0.0).unwrap();
        assert_eq!(phi_eval(&p0, [0.0, 0.0], 1.0).unwrap(), 1.0);
        assert_eq!(phi_eval(&p0, [0.0, 0.0], 0.0).unwrap(), 1.0);
        assert!(phi_eval(&p2, [0.0, 0.0], -1.0).is_err());
        let sing = DegeneracyLaw::power(-0.5).unwrap();
        assert_eq!(phi_eval(&sing, [0.0, 0.0], 0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn declared_constants_validated() {
        assert!(DegeneracyLaw::power(-1.0).is_err());
        assert!(
            DegeneracyLaw::declared(LawKind::Power { p: 1.0 }, 1.0, 0.5, 1.0, 1.0, 1.0).is_err()
        );
        assert!(
            DegeneracyLaw::declared(LawKind::Power { p: 1.0 }, 1.0, 1.0, 0.5, 1.0, 1.0).is_err()
        );
    }

    #[test]
    fn a2_checks() {
        let xs = grid_points();
        for p in [-0.5, 0.0, 1.0, 2.0] {
            let r = check_a2(&DegeneracyLaw::power(p).unwrap(), &xs, 200, 3).unwrap();
            assert!(r.passed(), "p = {p}: {r:?}");
        }
        let dp = DegeneracyLaw::double_phase(1.0, 2.0, Field::constant(1.0), &xs).unwrap();
        assert!(check_a2(&dp, &xs, 200, 3).unwrap().passed());
        let mis =
            DegeneracyLaw::declared(LawKind::Power { p: 2.0 }, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(check_a2(&mis, &xs, 200, 3).unwrap().monotonicity_violations > 0);
        let mis_nu =
            DegeneracyLaw::declared(LawKind::Power { p: 2.0 }, 2.0, 2.0, 1.0, 2.0, 3.0).unwrap();
        assert!(
            check_a2(&mis_nu, &xs, 10, 3)
                .unwrap()
                .normalization_violations
                > 0
        );
    }

    #[test]
    fn variable_exponent_indices_from_samples() {
        let p = Field::from_fn(|x| 1.0 + 0.5 * x[0]);
        let law = DegeneracyLaw::variable_exponent(p, &grid_points()).unwrap();
        assert!((law.i_phi - 0.5).abs() < 1e-15 && (law.s_phi - 1.5).abs() < 1e-15);
        assert!(check_a2(&law, &grid_points(), 100, 1).unwrap().passed());
    }

    #[test]
    fn singular_transform_examples() {
        let t = transform_singular_to_degenerate(&DegeneracyLaw::power(-0.5).unwrap());
        assert_eq!(t.law.as_power(), Some(0.0));
        assert_eq!((t.law.i_phi, t.law.s_phi), (0.0, 0.0));
        assert_eq!(t.forcing_multiplier(4.0), 2.0);

        let t0 = transform_singular_to_degenerate(&DegeneracyLaw::power(0.0).unwrap());
        assert_eq!(t0.law.as_power(), Some(0.0));

        let a = Field::from_fn(|x| 1.0 + x[0] * x[0]);
        let dp = DegeneracyLaw::double_phase(-0.5, 0.5, a.clone(), &grid_points()).unwrap();
        let t = transform_singular_to_degenerate(&dp);
        assert_eq!((t.law.i_phi, t.law.s_phi), (0.0, 1.0));
        for &x in &grid_points() {
            for s in [0.1, 1.0, 7.0] {
                let expect = 1.0 + a.eval(x) * s;
                assert!((phi_eval(&t.law, x, s).unwrap() - expect).abs() < 1e-13);
            }
        }
        assert!(check_a2(&t.law, &grid_points(), 100, 2).unwrap().passed());
    }

    #[test]
    fn smallness_rescaling() {
        let p = DegeneracyLaw::power(1.5).unwrap();
        let r = rescale_smallness(&p, [0.2, 0.0], 0.3, 5.0).unwrap();
        assert_eq!(r.as_power(), Some(1.5));

        let dp = DegeneracyLaw::double_phase(1.0, 2.0, Field::constant(1.0), &[]).unwrap();
        let r = rescale_smallness(&dp, [0.0, 0.0], 0.5, 1.0).unwrap();
        assert!((phi_eval(&r, [0.0, 0.0], 2.0).unwrap() - 20.0 / 6.0).abs() < 1e-14);
        for &y in &grid_points() {
            assert!((phi_eval(&r, y, 1.0).unwrap() - 1.0).abs() < 1e-15);
        }
        assert_eq!((r.i_phi, r.s_phi, r.l), (1.0, 2.0, 1.0));
        assert!(check_a2(&r, &grid_points(), 100, 4).unwrap().passed());

        assert!(rescale_smallness(&dp, [0.0, 0.0], 0.5, 0.5).is_err());
        assert!(rescale_smallness(&dp, [0.0, 0.0], 1.5, 2.0).is_err());
        assert!(rescale_smallness(&dp, [0.0, 0.0], 0.0, 2.0).is_err());
    }

    #[test]
    fn iterate_rescaling() {
        let a = Field::from_fn(|x| 2.0 + x[0]);
        let dp = DegeneracyLaw::double_phase(0.5, 2.0, a, &grid_points()).unwrap();
        let k0 = rescale_iterate(&dp, 0.25, 0, 0.4, [0.0, 0.0]).unwrap();
        for &y in &grid_points() {
            let expect = phi_eval(&dp, y, 3.0).unwrap() / phi_eval(&dp, y, 1.0).unwrap();
            assert!((phi_eval(&k0, y, 3.0).unwrap() - expect).abs() < 1e-13);
            assert!((phi_eval(&k0, y, 1.0).unwrap() - 1.0).abs() < 1e-15);
        }
        let p = DegeneracyLaw::power(2.0).unwrap();
        for k in 0..5 {
            assert_eq!(
                rescale_iterate(&p, 0.3, k, 0.5, [0.1, 0.0])
                    .unwrap()
                    .as_power(),
                Some(2.0)
            );
        }
        assert!(rescale_iterate(&p, 0.5, 1, 0.5, [0.0, 0.0]).is_err());
        assert!(rescale_iterate(&p, 0.3, 1, 1.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn iterate_composes() {
        let a = Field::from_fn(|x| 1.0 + x[0] * x[0] + x[1]);
        let dp = DegeneracyLaw::double_phase(0.5, 2.0, a, &grid_points()).unwrap();
        let (rho, alpha) = (0.3, 0.4);
        let twice = rescale_iterate(
            &rescale_iterate(&dp, rho, 2, alpha, [0.0, 0.0]).unwrap(),
            rho,
            3,
            alpha,
            [0.0, 0.0],
        )
        .unwrap();
        let once = rescale_iterate(&dp, rho, 5, alpha, [0.0, 0.0]).unwrap();
        for &y in &grid_points() {
            for t in [0.01, 0.5, 4.0] {
                let (a, b) = (
                    phi_eval(&twice, y, t).unwrap(),
                    phi_eval(&once, y, t).unwrap(),
                );
                assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
            }
        }
    }
}
