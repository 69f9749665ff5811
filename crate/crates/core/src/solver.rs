//! Pseudo-time relaxation of the ε-regularized equation, ε-continuation and
//! the explicit barrier sub/supersolutions that bracket every iterate.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::geometry::{ball_condition_radius, DomainKind, GridFunction};
use crate::scheme::{Discretization, SchemeParams};
use crate::{Error, Result};

/// How node updates are ordered within one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relaxation {
    /// Explicit Euler `u ← u + τ_i·G_ε(u)_i` on all nodes at once, with the
    /// local step `τ_i = 2·cfl / D_i` where `D_i` bounds `|∂G_i/∂u_i|`.
    Jacobi,
    /// Nonlinear over-relaxation: each node moves `ω` times the way to the
    /// root of its own residual; nodes are swept in lattice colors so that one
    /// color can be updated in parallel.
    ColoredSor,
}

/// Which barrier the first stage starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    /// The subsolution. Iterates rise towards the solution; near critical
    /// points of singular problems this is far faster than descending.
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Decreasing sequence of ε values; each stage warm-starts the next.
    pub epsilons: Vec<f64>,
    /// Gradient floors as multiples of `h`, one per stage (the last repeats).
    pub eta_factors: Vec<f64>,
    pub cfl: f64,
    /// Relative residual tolerance; the absolute one is `tolerance·max(1, ‖f‖∞)`.
    pub tolerance: f64,
    /// Sweeps allowed per stage.
    pub max_iterations: usize,
    pub relaxation: Relaxation,
    /// Over-relaxation factor; `None` picks `2/(1 + sin(π h / diam))`.
    pub omega: Option<f64>,
    /// Keep iterates between the barrier sub- and supersolution.
    pub clamp: bool,
    /// Barrier constant; `None` grows it until the barriers are discrete
    /// sub/supersolutions.
    pub barrier_k: Option<f64>,
    /// Initial iterate when barriers exist (zero otherwise).
    pub start: Start,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            epsilons: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            eta_factors: vec![1e-6],
            cfl: 0.5,
            tolerance: 1e-8,
            max_iterations: 200_000,
            relaxation: Relaxation::ColoredSor,
            omega: None,
            clamp: true,
            barrier_k: None,
            start: Start::Below,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::input(
                "ε schedule must be nonempty with values in (0, 1]",
            ));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::input("ε schedule must be strictly decreasing"));
        }
        if self.eta_factors.is_empty() || self.eta_factors.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::input("η factors must be positive"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::input("cfl must lie in (0, 1]"));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::input(
                "tolerance and max_iterations must be positive",
            ));
        }
        if let Some(w) = self.omega {
            if !(w > 0.0 && w < 2.0) {
                return Err(Error::input("ω must lie in (0, 2)"));
            }
        }
        Ok(())
    }

    fn eta(&self, stage: usize, h: f64) -> f64 {
        self.eta_factors[stage.min(self.eta_factors.len() - 1)] * h
    }
}

/// One ε stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub epsilon: f64,
    pub eta: f64,
    pub iterations: usize,
    pub residual: f64,
    /// `‖u_ε − u_{previous ε}‖∞` (undefined for the first stage).
    pub delta: Option<f64>,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub stages: Vec<StageReport>,
    pub tolerance: f64,
    /// Largest difference quotient between lattice neighbours.
    pub lipschitz: f64,
    /// Largest `|u(x) − u(y)| / |x − y|^{1/2}` between lattice neighbours.
    pub holder_half: f64,
    /// Final residual with the gradient floor reduced tenfold; compares the
    /// η-floor regularization with its limit.
    pub residual_eta_tenth: f64,
    pub barrier_k: Option<f64>,
    pub wall_time: Duration,
}

/// An explicit barrier and the constant it was built with.
#[derive(Debug, Clone)]
pub struct Barrier {
    pub values: GridFunction,
    pub k: f64,
}

/// Ellipticity exponent `κ₀ = (nΛ + 1)/λ` of the radial barriers in dimension `n`.
pub fn barrier_exponent(n: usize, lambda: f64, big_lambda: f64) -> f64 {
    (n as f64 * big_lambda + 1.0) / lambda
}

/// Largest `ε` any schedule may use; barriers are checked against it.
const EPS_MAX: f64 = 1.0;

/// Supersolution `w = min_{z,δ} g(z) + δ + max(K, m_{z,δ})·v_z` built from
/// the exterior-ball barriers `v_z(x) = r^{−κ₀} − |x − x_z|^{−κ₀}`, where
/// `x_z = z + r ν(z)` and `m_{z,δ}` is the smallest multiplier that keeps the
/// member above `g` on the sampled boundary.
///
/// With `k = None`, `K` starts at `max(1, (r+diam)^{κ₀+1}/κ₀)` and is multiplied
/// by 4 until `Φ F_h(w) − f(x) + max(0, −w) ≤ 0` at every interior node for
/// every floor in `etas`, so that `w` is a discrete supersolution for every
/// `ε ≤ 1`.
pub fn build_supersolution(disc: &Discretization, k: Option<f64>, etas: &[f64]) -> Result<Barrier> {
    let dom = &disc.problem.domain;
    if matches!(dom.kind, DomainKind::HalfGraph { .. }) {
        return Err(Error::Resolution(
            "barriers need a closed C^{1,1} boundary".into(),
        ));
    }
    let r = ball_condition_radius(dom, 512)?;
    let e = disc.problem.operator.ellipticity;
    let kappa = barrier_exponent(2, e.lambda(), e.big_lambda());
    let h = disc.h();
    let count = (4.0 * dom.perimeter() / h).ceil() as usize;
    let samples = dom.boundary_samples(count.max(8));
    let g = &disc.problem.boundary.g;
    let gz: Vec<f64> = samples.iter().map(|s| g.eval(s.point)).collect();
    let centers: Vec<[f64; 2]> = samples
        .iter()
        .map(|s| [s.point[0] + r * s.normal[0], s.point[1] + r * s.normal[1]])
        .collect();
    let rk = r.powf(-kappa);
    let v1 = |c: [f64; 2], x: [f64; 2]| {
        let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        rk - d2.powf(-0.5 * kappa)
    };
    let mut deltas = vec![];
    let mut d = 1.0;
    while d > h {
        deltas.push(d);
        d *= 0.5;
    }
    deltas.push(h);
    // m[j][l] = sup_y (g(y) − g(z_j) − δ_l) / v_{z_j}(y)
    let m: Vec<Vec<f64>> = (0..samples.len())
        .into_par_iter()
        .map(|j| {
            let mut best = vec![f64::NEG_INFINITY; deltas.len()];
            for (i, s) in samples.iter().enumerate() {
                let v = v1(centers[j], s.point);
                if i == j || !(v > 0.0) {
                    continue;
                }
                for (l, dl) in deltas.iter().enumerate() {
                    best[l] = best[l].max((gz[i] - gz[j] - dl) / v);
                }
            }
            best
        })
        .collect();
    let diam = dom.diameter();
    let mut kk = k.unwrap_or_else(|| 1f64.max((r + diam).powf(kappa + 1.0) / kappa));
    let fixed = k.is_some();
    let n = disc.interior_len();
    let nodes: Vec<[f64; 2]> = (0..n).map(|s| disc.grid.point(disc.node(s))).collect();
    for _ in 0..60 {
        let inner: Vec<f64> = nodes
            .par_iter()
            .map(|&x| {
                let mut w = f64::INFINITY;
                for (j, c) in centers.iter().enumerate() {
                    let v = v1(*c, x);
                    for (l, dl) in deltas.iter().enumerate() {
                        w = w.min(gz[j] + dl + kk.max(m[j][l]) * v);
                    }
                }
                w
            })
            .collect();
        let mut values = disc.grid_function(|_| 0.0);
        for (s, w) in inner.iter().enumerate() {
            values.values[disc.node(s)] = *w;
        }
        if fixed || is_supersolution(disc, &values, etas) {
            return Ok(Barrier { values, k: kk });
        }
        kk *= 4.0;
    }
    Err(Error::Resolution(
        "barrier constant K did not stabilize".into(),
    ))
}

fn is_supersolution(disc: &Discretization, w: &GridFunction, etas: &[f64]) -> bool {
    etas.iter().all(|&eta| {
        let params = SchemeParams {
            eta,
            epsilon: 0.0,
            xi: [0.0, 0.0],
        };
        disc.residual(w, &params)
            .iter()
            .enumerate()
            .all(|(s, r)| r + EPS_MAX * (-w.values[disc.node(s)]).max(0.0) <= 0.0)
    })
}

/// Subsolution `v = −w̃`, where `w̃` is the supersolution of the negated problem.
pub fn build_subsolution(disc: &Discretization, k: Option<f64>, etas: &[f64]) -> Result<Barrier> {
    let neg = disc.negated();
    let mut b = build_supersolution(&neg, k, etas)?;
    for v in b.values.values.iter_mut() {
        *v = -*v;
    }
    Ok(b)
}

/// State of the relaxation for one ε.
pub struct Relaxer<'a> {
    disc: &'a Discretization,
    params: SchemeParams,
    u: Vec<f64>,
    bounds: Option<(Vec<f64>, Vec<f64>)>,
    mode: Relaxation,
    cfl: f64,
    omega: f64,
    colors: Vec<Vec<usize>>,
    /// Largest unrelaxed correction `|root − u|` of the last sweep.
    correction: f64,
}

impl<'a> Relaxer<'a> {
    pub fn new(
        disc: &'a Discretization,
        params: SchemeParams,
        init: &GridFunction,
        bounds: Option<(&GridFunction, &GridFunction)>,
        cfg: &SolveConfig,
    ) -> Self {
        let period = disc.stencil.width() as i64 + 1;
        let mut colors = vec![Vec::new(); (period * period) as usize];
        for k in 0..disc.interior_len() {
            let ij = disc.lattice(k);
            colors[(ij[0].rem_euclid(period) + period * ij[1].rem_euclid(period)) as usize].push(k);
        }
        let omega = match cfg.relaxation {
            Relaxation::Jacobi => 1.0,
            Relaxation::ColoredSor => cfg.omega.unwrap_or_else(|| Relaxer::default_omega(disc)),
        };
        let bounds = bounds.map(|(lo, hi)| {
            let pick = |f: &GridFunction| {
                (0..disc.interior_len())
                    .map(|k| f.values[disc.node(k)])
                    .collect()
            };
            (pick(lo), pick(hi))
        });
        let mut r = Relaxer {
            disc,
            params,
            u: init.values.clone(),
            bounds,
            mode: cfg.relaxation,
            cfl: cfg.cfl,
            omega,
            colors,
            correction: f64::INFINITY,
        };
        for k in 0..disc.interior_len() {
            let node = disc.node(k);
            r.u[node] = r.clamp(k, r.u[node]);
        }
        r
    }

    #[inline]
    fn clamp(&self, k: usize, v: f64) -> f64 {
        match &self.bounds {
            Some((lo, hi)) => v.max(lo[k]).min(hi[k]),
            None => v,
        }
    }

    /// `2/(1 + sin(π h / diam))`, the optimal factor for the Laplacian.
    pub fn default_omega(disc: &Discretization) -> f64 {
        let s = (std::f64::consts::PI * disc.h() / disc.problem.domain.diameter()).sin();
        2.0 / (1.0 + s)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn into_values(self) -> Vec<f64> {
        self.u
    }

    /// `‖G_ε(u)‖∞` over interior nodes.
    pub fn residual_norm(&self) -> f64 {
        (0..self.disc.interior_len())
            .into_par_iter()
            .map(|k| {
                self.disc
                    .node_residual(k, &self.u, self.u[self.disc.node(k)], &self.params)
                    .abs()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// `max |G_ε(u)_k| / D_k`, the size of the pseudo-time step each node
    /// would take; unlike the raw residual it is not inflated where Φ is
    /// huge.
    pub fn scaled_residual_norm(&self) -> f64 {
        let d = self.disc;
        (0..d.interior_len())
            .into_par_iter()
            .map(|k| {
                let c = self.u[d.node(k)];
                d.node_residual(k, &self.u, c, &self.params).abs()
                    / d.center_derivative_bound(k, &self.u, c, &self.params)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Largest unrelaxed correction of the last sweep.
    pub fn correction(&self) -> f64 {
        self.correction
    }

    /// One sweep; returns the largest residual met before the updates.
    pub fn sweep(&mut self) -> f64 {
        match self.mode {
            Relaxation::Jacobi => {
                let d = self.disc;
                let u = &self.u;
                let p = &self.params;
                let cfl = self.cfl;
                let upd: Vec<(f64, f64)> = (0..d.interior_len())
                    .into_par_iter()
                    .map(|k| {
                        let c = u[d.node(k)];
                        let r = d.node_residual(k, u, c, p);
                        let tau = 2.0 * cfl / d.center_derivative_bound(k, u, c, p);
                        (c + tau * r, r.abs())
                    })
                    .collect();
                let (mut worst, mut correction) = (0.0f64, 0.0f64);
                for (k, (v, r)) in upd.into_iter().enumerate() {
                    let node = self.disc.node(k);
                    correction = correction.max((v - self.u[node]).abs());
                    self.u[node] = self.clamp(k, v);
                    worst = worst.max(r);
                }
                self.correction = correction;
                worst
            }
            Relaxation::ColoredSor => {
                let (mut worst, mut correction) = (0.0f64, 0.0f64);
                for color in 0..self.colors.len() {
                    let d = self.disc;
                    let u = &self.u;
                    let p = &self.params;
                    let omega = self.omega;
                    let upd: Vec<(f64, f64, f64)> = self.colors[color]
                        .par_iter()
                        .map(|&k| {
                            let c = u[d.node(k)];
                            let (root, r) = local_root(d, k, u, c, p);
                            (c + omega * (root - c), (root - c).abs(), r.abs())
                        })
                        .collect();
                    for (i, (v, step, r)) in upd.into_iter().enumerate() {
                        let k = self.colors[color][i];
                        let node = self.disc.node(k);
                        self.u[node] = self.clamp(k, v);
                        worst = worst.max(r);
                        correction = correction.max(step);
                    }
                }
                self.correction = correction;
                worst
            }
        }
    }

    /// Minimal-polynomial extrapolation from equally spaced snapshots.
    ///
    /// Once the error is dominated by a few slow modes, the snapshot
    /// differences `Δ_j` are nearly linearly dependent; the combination
    /// `Σ c_j Δ_j ≈ 0` (last coefficient 1) gives weights `c_j / Σ c` that
    /// cancel those modes in the averaged iterate. The jump is kept only if
    /// it lowers the residual. Returns whether the state changed.
    fn extrapolate(&mut self, snaps: &[Vec<f64>]) -> bool {
        let d = self.disc;
        let m = snaps.len();
        let nodes: Vec<usize> = (0..d.interior_len()).map(|k| d.node(k)).collect();
        let diff = |j: usize, node: usize| -> f64 {
            let next = if j + 1 == m {
                self.u[node]
            } else {
                snaps[j + 1][node]
            };
            next - snaps[j][node]
        };
        // Gram matrix of the differences.
        let mut gram = vec![vec![0.0; m]; m];
        for &node in &nodes {
            let dv: Vec<f64> = (0..m).map(|j| diff(j, node)).collect();
            for i in 0..m {
                for j in i..m {
                    gram[i][j] += dv[i] * dv[j];
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                gram[i][j] = gram[j][i];
            }
        }
        if !(gram[m - 1][m - 1] > 0.0) {
            return false;
        }
        // min ‖Σ_{j<m-1} c_j Δ_j + Δ_{m-1}‖ by normal equations.
        let k = m - 1;
        let mut a: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let mut row = gram[i][..k].to_vec();
                row.push(-gram[i][k]);
                row
            })
            .collect();
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, piv);
            let p = a[col][col];
            if p.abs() <= 1e-14 * gram[0][0].max(gram[k][k]) {
                return false;
            }
            for r in 0..k {
                if r != col {
                    let f = a[r][col] / p;
                    for c in col..=k {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        let mut c: Vec<f64> = (0..k).map(|i| a[i][k] / a[i][i]).collect();
        c.push(1.0);
        let total: f64 = c.iter().sum();
        if !(total.abs() > 1e-12) || !c.iter().all(|x| x.is_finite()) {
            return false;
        }
        let gamma: Vec<f64> = c.iter().map(|x| x / total).collect();
        if gamma.iter().map(|g| g.abs()).sum::<f64>() > 1e4 {
            return false;
        }
        let before = self.scaled_residual_norm();
        let saved = self.u.clone();
        for (kk, &node) in nodes.iter().enumerate() {
            // Σ γ_j x_{j+1}, the snapshots following each difference.
            let mut v = 0.0;
            for j in 0..m {
                let x = if j + 1 == m {
                    saved[node]
                } else {
                    snaps[j + 1][node]
                };
                v += gamma[j] * x;
            }
            self.u[node] = self.clamp(kk, v);
        }
        if self.scaled_residual_norm() <= before {
            true
        } else {
            self.u = saved;
            false
        }
    }
}

/// Approximate root in the center value of the (decreasing) node residual,
/// with the residual at the current value. Starts with the safe step `r/D`,
/// then expands geometrically (secant-guided) until the root is bracketed and
/// finishes by regula falsi.
fn local_root(d: &Discretization, k: usize, u: &[f64], c0: f64, p: &SchemeParams) -> (f64, f64) {
    let res = |c: f64| d.node_residual(k, u, c, p);
    let r0 = res(c0);
    if r0 == 0.0 {
        return (c0, r0);
    }
    let target = 1e-3 * r0.abs();
    let bound = d.center_derivative_bound(k, u, c0, p);
    let (mut s0, mut q0) = (c0, r0);
    let mut step = r0 / bound;
    let mut s1 = c0 + step;
    let mut q1 = res(s1);
    let mut grow = 0;
    while q1.abs() > target && q1.signum() == q0.signum() {
        grow += 1;
        if grow > 200 || !s1.is_finite() {
            return (s0, r0);
        }
        // The secant suggestion, kept between doubling and ×16 of the last step.
        let slope = (q1 - q0) / (s1 - s0);
        let secant = if slope < 0.0 {
            -q1 / slope
        } else {
            f64::INFINITY.copysign(step)
        };
        let (lo, hi) = (2.0 * step.abs(), 16.0 * step.abs());
        step = secant.abs().clamp(lo, hi).copysign(step);
        s0 = s1;
        q0 = q1;
        s1 += step;
        q1 = res(s1);
    }
    if q1.abs() <= target {
        return (s1, r0);
    }
    // Illinois regula falsi on the bracket [s0, s1].
    let (mut a, mut fa, mut b, mut fb) = (s0, q0, s1, q1);
    let mut side = 0;
    for _ in 0..60 {
        let m = (a * fb - b * fa) / (fb - fa);
        let fm = res(m);
        if fm.abs() <= target || m == a || m == b {
            return (m, r0);
        }
        if fm.signum() == fb.signum() {
            b = m;
            fb = fm;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = m;
            fa = fm;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    (if fa.abs() < fb.abs() { a } else { b }, r0)
}

/// Solves `G_ε(u) = 0` from `init`. Nodes are kept between `bounds` when given.
pub fn solve_epsilon(
    disc: &Discretization,
    epsilon: f64,
    eta: f64,
    init: &GridFunction,
    bounds: Option<(&GridFunction, &GridFunction)>,
    cfg: &SolveConfig,
) -> Result<(GridFunction, StageReport)> {
    if !(epsilon > 0.0) {
        return Err(Error::input("ε must be positive"));
    }
    let params = SchemeParams::new(eta, epsilon)?;
    let tol = absolute_tolerance(disc, cfg);
    let mut rx = Relaxer::new(disc, params, init, bounds, cfg);
    let mut best = f64::INFINITY;
    let mut best_u = rx.values().to_vec();
    let mut last = f64::INFINITY;
    // Over-relaxation can lock into a cycle on the kinks of max/min
    // operators; a window whose smallest correction is no better than the
    // previous window's shrinks ω.
    let window = 256;
    let (mut window_min, mut prev_window_min) = (f64::INFINITY, f64::INFINITY);
    let mut snapshots: Vec<Vec<f64>> = Vec::new();
    for it in 1..=cfg.max_iterations {
        let lagged = rx.sweep();
        if lagged < tol {
            let r = rx.residual_norm();
            if r < tol {
                let omega = rx.omega();
                let values = rx.into_values();
                return Ok((
                    GridFunction { values },
                    StageReport {
                        epsilon,
                        eta,
                        iterations: it,
                        residual: r,
                        delta: None,
                        omega,
                    },
                ));
            }
        }
        // Progress is judged by the size of the corrections: the raw residual
        // is scaled by Φ and jumps around where Φ is huge.
        let step = rx.correction();
        if step < best {
            best = step;
            if it % 64 == 0 {
                best_u.copy_from_slice(rx.values());
            }
        } else if step > 1e3 * best && rx.omega > 1.0 {
            // Over-relaxation is diverging: restart from the last good state
            // with a smaller factor.
            rx.u.copy_from_slice(&best_u);
            rx.omega = 1.0 + 0.5 * (rx.omega - 1.0);
            best = f64::INFINITY;
        }
        last = lagged;
        window_min = window_min.min(step);
        if it % window == 0 {
            if rx.omega > 1.0 && window_min >= prev_window_min {
                rx.omega = if rx.omega < 1.05 {
                    1.0
                } else {
                    1.0 + 0.5 * (rx.omega - 1.0)
                };
            }
            prev_window_min = window_min;
            window_min = f64::INFINITY;
        }
        if rx.mode == Relaxation::ColoredSor && it % EXTRAPOLATION_SPACING == 0 {
            if snapshots.len() == EXTRAPOLATION_DEPTH {
                if rx.extrapolate(&snapshots) {
                    snapshots.clear();
                } else {
                    snapshots.remove(0);
                }
            }
            snapshots.push(rx.values().to_vec());
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        epsilon,
        residual: last,
        tolerance: tol,
    })
}

/// Sweeps between the snapshots used by [`Relaxer::extrapolate`].
const EXTRAPOLATION_SPACING: usize = 50;

/// Number of snapshot differences combined by [`Relaxer::extrapolate`].
const EXTRAPOLATION_DEPTH: usize = 4;

fn absolute_tolerance(disc: &Discretization, cfg: &SolveConfig) -> f64 {
    let fmax = (0..disc.interior_len())
        .map(|k| disc.forcing(k).abs())
        .fold(0.0, f64::max);
    cfg.tolerance * fmax.max(1.0)
}

/// A converged solution with the barriers that bracketed it.
#[derive(Debug, Clone)]
pub struct Solution {
    pub disc: Discretization,
    pub u: GridFunction,
    pub report: SolveReport,
    pub lower: Option<Barrier>,
    pub upper: Option<Barrier>,
}

/// Runs the ε schedule, warm-starting each stage from the previous one. The
/// first stage starts from the barrier selected by `cfg.start` when barriers
/// exist, otherwise from the boundary data extended by zero.
pub fn solve_dirichlet(disc: Discretization, cfg: &SolveConfig) -> Result<Solution> {
    cfg.validate()?;
    let start = Instant::now();
    let h = disc.h();
    let etas: Vec<f64> = (0..cfg.epsilons.len()).map(|s| cfg.eta(s, h)).collect();
    let (lower, upper) = match (
        build_subsolution(&disc, cfg.barrier_k, &etas),
        build_supersolution(&disc, cfg.barrier_k, &etas),
    ) {
        (Ok(l), Ok(u)) => (Some(l), Some(u)),
        (Err(Error::Resolution(_)), _) | (_, Err(Error::Resolution(_))) => (None, None),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let bounds = match (&lower, &upper, cfg.clamp) {
        (Some(l), Some(u), true) => Some((&l.values, &u.values)),
        _ => None,
    };
    let mut u = match (&lower, &upper, cfg.start) {
        (Some(v), _, Start::Below) => v.values.clone(),
        (_, Some(w), Start::Above) => w.values.clone(),
        _ => disc.grid_function(|_| 0.0),
    };
    let mut stages: Vec<StageReport> = Vec::new();
    // Over-relaxation that cycles on operator kinks does so at every ε; once
    // two stages in a row had to reduce ω, later stages start from the
    // reduced factor. A single reduction is treated as transient.
    let mut stage_cfg = cfg.clone();
    let mut reduced_before = false;
    for (s, &eps) in cfg.epsilons.iter().enumerate() {
        let (next, mut rep) = solve_epsilon(&disc, eps, etas[s], &u, bounds, &stage_cfg)?;
        if cfg.omega.is_none() && cfg.relaxation == Relaxation::ColoredSor {
            let initial = Relaxer::default_omega(&disc);
            let reduced = rep.omega < initial;
            if reduced && reduced_before {
                stage_cfg.omega = Some(rep.omega.max(1.0));
            }
            reduced_before = reduced;
        }
        if s > 0 {
            let interior = disc.grid.interior();
            rep.delta = Some(next.max_diff_on(&u, interior));
        }
        u = next;
        stages.push(rep);
    }
    let last_eps = *cfg.epsilons.last().unwrap();
    let tenth = SchemeParams::new(0.1 * etas[etas.len() - 1], last_eps)?;
    let residual_eta_tenth = disc
        .residual(&u, &tenth)
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));
    let (lipschitz, holder_half) = neighbour_quotients(&disc, &u);
    let report = SolveReport {
        stages,
        tolerance: absolute_tolerance(&disc, cfg),
        lipschitz,
        holder_half,
        residual_eta_tenth,
        barrier_k: upper.as_ref().map(|b| b.k),
        wall_time: start.elapsed(),
    };
    Ok(Solution {
        disc,
        u,
        report,
        lower,
        upper,
    })
}

fn neighbour_quotients(disc: &Discretization, u: &GridFunction) -> (f64, f64) {
    let grid = &disc.grid;
    let h = grid.h;
    let mut lip = 0.0f64;
    let mut hol = 0.0f64;
    for a in 0..grid.len() {
        let ij = grid.lattice(a);
        for step in [[1, 0], [0, 1], [1, 1], [1, -1]] {
            if let Some(b) = grid.active_at([ij[0] + step[0], ij[1] + step[1]]) {
                let dist = h * ((step[0] * step[0] + step[1] * step[1]) as f64).sqrt();
                let du = (u.values[a] - u.values[b]).abs();
                lip = lip.max(du / dist);
                hol = hol.max(du / dist.sqrt());
            }
        }
    }
    (lip, hol)
}
