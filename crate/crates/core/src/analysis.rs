//! Verification of the a priori estimates on computed or analytic functions:
//! contact sets and ABP, boundary barriers, comparison, smallness rescaling,
//! admissible Hölder exponents, affine approximation rates and Lipschitz
//! bounds.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::degeneracy::{self, DegeneracyLaw};
use crate::geometry::{ball_condition_radius, BoundaryData, Domain, Grid, GridFunction, NodeKind};
use crate::operators::EllipticityPair;
use crate::scheme::{Discretization, SchemeParams};
use crate::{Error, Field, Point, Result};

/// A set of points where a check applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Whole,
    Ball { center: Point, radius: f64 },
}

impl Region {
    pub fn contains(&self, x: Point) -> bool {
        match *self {
            Region::Whole => true,
            Region::Ball { center, radius } => dist(x, center) < radius,
        }
    }
}

#[inline]
fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[inline]
fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

// ---------------------------------------------------------------------------
// Upper contact sets
// ---------------------------------------------------------------------------

/// Nodes where `u` is touched from above by a plane, with a touching slope.
#[derive(Debug, Clone)]
pub struct ContactSet {
    /// Active node indices that were examined.
    pub nodes: Vec<usize>,
    /// Membership, parallel to `nodes`.
    pub mask: Vec<bool>,
    /// The smallest touching slope of each member, parallel to `nodes`.
    pub slopes: Vec<Option<Point>>,
    /// Slope bound `R` for `Γ⁺_R`, if any.
    pub slope_bound: Option<f64>,
    /// Absolute slack allowed in the support inequality.
    pub tolerance: f64,
}

impl ContactSet {
    /// Number of member nodes.
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Member nodes with their slopes.
    pub fn members(&self) -> impl Iterator<Item = (usize, Point)> + '_ {
        self.nodes
            .iter()
            .zip(&self.slopes)
            .filter_map(|(&a, p)| p.map(|p| (a, p)))
    }
}

/// Support-inequality slack for values `values`: `1e−10·max(1, ‖u‖∞)`.
pub fn contact_tolerance(values: &[f64]) -> f64 {
    1e-10 * values.iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

/// Slopes are searched in the box `|p_i| ≤ B`, far beyond any difference
/// quotient of the data.
fn slope_box(values: &[f64], spacing: f64) -> f64 {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    1e3 * ((hi - lo).max(0.0) + 1.0) / spacing
}

/// `Γ⁺(u)` among the interior nodes (or `Γ⁺_R(u)` when `bound` is given),
/// with supporting planes required to lie above `u` at every grid node.
pub fn upper_contact_set(u: &GridFunction, grid: &Grid, bound: Option<f64>) -> ContactSet {
    let all: Vec<usize> = (0..grid.len()).collect();
    contact_set_on(grid, &u.values, grid.interior(), &all, bound)
}

/// Upper contact set of the nodal data `values` (one per active node),
/// examined at the nodes `examine`.
///
/// A node `x` belongs to the set when some slope `p` satisfies
/// `u(y) ≤ u(x) + p·(y−x) + tol` for every node `y` of `support` (which
/// should contain `examine`). Lattice-line
/// sweeps first discard nodes lying below a chord of the data on some line (a
/// necessary condition that keeps every vertex of the concave envelope); the
/// survivors are decided exactly by a cutting-plane search over the slope
/// polygon against the survivors' constraints only — a plane above all
/// envelope vertices lies above the whole envelope.
pub fn contact_set_on(
    grid: &Grid,
    values: &[f64],
    examine: &[usize],
    support: &[usize],
    bound: Option<f64>,
) -> ContactSet {
    assert_eq!(grid.len(), values.len());
    let sv: Vec<f64> = support.iter().map(|&a| values[a]).collect();
    let tol = contact_tolerance(&sv);
    let big = slope_box(&sv, grid.h);
    let pts: Vec<Point> = grid.points().collect();
    let lat: Vec<[i64; 2]> = support.iter().map(|&a| grid.lattice(a)).collect();
    let keep = line_sweeps(&lat, &sv, tol);
    let mut candidate = vec![false; grid.len()];
    for (k, &a) in support.iter().enumerate() {
        candidate[a] = keep[k];
    }
    let in_support: Vec<bool> = {
        let mut m = vec![false; grid.len()];
        support.iter().for_each(|&a| m[a] = true);
        m
    };
    let cand: Vec<usize> = support.iter().copied().filter(|&a| candidate[a]).collect();

    let slopes: Vec<Option<Point>> = examine
        .par_iter()
        .map(|&i| {
            if !candidate[i] {
                return None;
            }
            let x = pts[i];
            let ux = values[i];
            let constraint = |j: usize| -> (Point, f64) {
                ([pts[j][0] - x[0], pts[j][1] - x[1]], values[j] - ux - tol)
            };
            let ij = grid.lattice(i);
            let mut seed = vec![[-big, -big], [big, -big], [big, big], [-big, big]];
            for off in NEIGHBOUR_OFFSETS {
                if let Some(j) = grid.active_at([ij[0] + off[0], ij[1] + off[1]]).filter(|&j| in_support[j]) {
                    let (a, b) = constraint(j);
                    seed = clip(&seed, a, b);
                }
            }
            // Feasible slope closest to `target`, by cutting planes.
            let closest = |target: Point| -> Option<Point> {
                let mut poly = seed.clone();
                for _ in 0..CUTTING_ROUNDS {
                    if poly.is_empty() {
                        return None;
                    }
                    let p = closest_point(&poly, target);
                    let mut worst = (1e-3 * tol, usize::MAX);
                    for &j in &cand {
                        let (a, b) = constraint(j);
                        let v = b - dot(a, p);
                        if v > worst.0 {
                            worst = (v, j);
                        }
                    }
                    if worst.1 == usize::MAX {
                        return Some(p);
                    }
                    let (a, b) = constraint(worst.1);
                    poly = clip(&poly, a, b);
                }
                for &j in &cand {
                    let (a, b) = constraint(j);
                    poly = clip(&poly, a, b);
                    if poly.is_empty() {
                        return None;
                    }
                }
                Some(closest_point(&poly, target))
            };
            // Reported slope: the feasible one nearest the local difference
            // gradient, which is the envelope's gradient where it is unique.
            let reference = local_gradient(grid, values, &in_support, i);
            match bound {
                None => closest(reference),
                Some(r) => {
                    let shortest = closest([0.0, 0.0])?;
                    if shortest[0].hypot(shortest[1]) > r {
                        return None;
                    }
                    let p = closest(reference)?;
                    Some(if p[0].hypot(p[1]) <= r { p } else { shortest })
                }
            }
        })
        .collect();
    ContactSet {
        nodes: examine.to_vec(),
        mask: slopes.iter().map(Option::is_some).collect(),
        slopes,
        slope_bound: bound,
        tolerance: tol,
    }
}

const NEIGHBOUR_OFFSETS: [[i64; 2]; 8] = [
    [1, 0],
    [-1, 0],
    [0, 1],
    [0, -1],
    [1, 1],
    [-1, -1],
    [1, -1],
    [-1, 1],
];

const CUTTING_ROUNDS: usize = 200;

/// Lattice directions used by the chord sweeps.
const SWEEP_DIRECTIONS: [[i64; 2]; 8] = [
    [1, 0],
    [0, 1],
    [1, 1],
    [1, -1],
    [2, 1],
    [1, 2],
    [2, -1],
    [1, -2],
];

/// `false` for nodes strictly below a chord of the data along a lattice line.
fn line_sweeps(lat: &[[i64; 2]], values: &[f64], tol: f64) -> Vec<bool> {
    let mut keep = vec![true; lat.len()];
    for v in SWEEP_DIRECTIONS {
        let mut lines: HashMap<i64, Vec<(i64, usize)>> = HashMap::new();
        for (i, ij) in lat.iter().enumerate() {
            let key = v[1] * ij[0] - v[0] * ij[1];
            let t = v[0] * ij[0] + v[1] * ij[1];
            lines.entry(key).or_default().push((t, i));
        }
        for line in lines.values_mut() {
            if line.len() < 3 {
                continue;
            }
            line.sort_unstable();
            // Upper hull of (t, u) by the monotone chain.
            let mut hull: Vec<(f64, f64)> = Vec::with_capacity(line.len());
            for &(t, i) in line.iter() {
                let q = (t as f64, values[i]);
                while hull.len() >= 2 {
                    let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
                    let cross = (b.0 - a.0) * (q.1 - a.1) - (b.1 - a.1) * (q.0 - a.0);
                    if cross >= 0.0 {
                        hull.pop();
                    } else {
                        break;
                    }
                }
                hull.push(q);
            }
            let mut seg = 0;
            for &(t, i) in line.iter() {
                let t = t as f64;
                while seg + 1 < hull.len() && hull[seg + 1].0 < t {
                    seg += 1;
                }
                if seg + 1 >= hull.len() {
                    continue;
                }
                let (a, b) = (hull[seg], hull[seg + 1]);
                let chord = a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0);
                if chord > values[i] + 2.0 * tol {
                    keep[i] = false;
                }
            }
        }
    }
    keep
}

/// Sutherland–Hodgman clip of a convex polygon to `{p : a·p ≥ b}`.
fn clip(poly: &[Point], a: Point, b: f64) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..n {
        let (p, q) = (poly[k], poly[(k + 1) % n]);
        let (sp, sq) = (dot(a, p) - b, dot(a, q) - b);
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Point of a convex polygon closest to `target`.
fn closest_point(poly: &[Point], target: Point) -> Point {
    let shifted: Vec<Point> = poly.iter().map(|p| [p[0] - target[0], p[1] - target[1]]).collect();
    let q = min_norm_point(&shifted);
    [q[0] + target[0], q[1] + target[1]]
}

/// Difference gradient at node `a` from its support neighbours (centered
/// where possible, one-sided otherwise, zero without neighbours).
fn local_gradient(grid: &Grid, values: &[f64], in_support: &[bool], a: usize) -> Point {
    let ij = grid.lattice(a);
    let at = |di: i64, dj: i64| {
        grid.active_at([ij[0] + di, ij[1] + dj])
            .filter(|&b| in_support[b])
            .map(|b| values[b])
    };
    let u0 = values[a];
    let h = grid.h;
    let mut g = [0.0; 2];
    for (k, (plus, minus)) in [(at(1, 0), at(-1, 0)), (at(0, 1), at(0, -1))].into_iter().enumerate() {
        g[k] = match (plus, minus) {
            (Some(p), Some(m)) => (p - m) / (2.0 * h),
            (Some(p), None) => (p - u0) / h,
            (None, Some(m)) => (u0 - m) / h,
            (None, None) => 0.0,
        };
    }
    g
}

/// Point of a convex polygon closest to the origin.
fn min_norm_point(poly: &[Point]) -> Point {
    let n = poly.len();
    if n == 1 {
        return poly[0];
    }
    // Origin inside (counter-clockwise orientation is preserved by clipping)?
    let inside = (0..n).all(|k| {
        let (p, q) = (poly[k], poly[(k + 1) % n]);
        (q[0] - p[0]) * (-p[1]) - (q[1] - p[1]) * (-p[0]) >= 0.0
    });
    if inside && n >= 3 {
        return [0.0, 0.0];
    }
    let mut best = poly[0];
    let mut best_d = f64::INFINITY;
    for k in 0..n {
        let (p, q) = (poly[k], poly[(k + 1) % n]);
        let e = [q[0] - p[0], q[1] - p[1]];
        let ee = dot(e, e);
        let t = if ee > 0.0 { (-dot(p, e) / ee).clamp(0.0, 1.0) } else { 0.0 };
        let c = [p[0] + t * e[0], p[1] + t * e[1]];
        let d = dot(c, c);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Brute-force contact mask: for every point, a randomized incremental
/// (Seidel) linear program decides whether the full system
/// `p·(y−x) ≥ u(y) − u(x) − tol` over all points `y` is feasible.
pub fn contact_mask_brute_force(points: &[Point], values: &[f64], tol: f64) -> Vec<bool> {
    assert_eq!(points.len(), values.len());
    let n = points.len();
    let mut spacing = f64::INFINITY;
    for i in 0..n {
        for j in 0..i {
            let d = dist(points[i], points[j]);
            if d > 0.0 {
                spacing = spacing.min(d);
            }
        }
    }
    if !spacing.is_finite() {
        spacing = 1.0;
    }
    let big = slope_box(values, spacing);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cons: Vec<(Point, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    (
                        [points[j][0] - points[i][0], points[j][1] - points[i][1]],
                        values[j] - values[i] - tol,
                    )
                })
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            cons.shuffle(&mut rng);
            seidel_feasible(&cons, big, 1e-3 * tol)
        })
        .collect()
}

/// Feasibility of `{a·p ≥ b} ∩ [−B, B]²` (each constraint relaxed by `eps`)
/// by Seidel's incremental algorithm with a fixed generic objective.
fn seidel_feasible(cons: &[(Point, f64)], big: f64, eps: f64) -> bool {
    let c = [1.0, 0.618_033_988_749_894_9];
    let mut v = [-big, -big];
    for (i, &(a, b)) in cons.iter().enumerate() {
        if dot(a, v) >= b - eps {
            continue;
        }
        let aa = dot(a, a);
        if aa == 0.0 {
            if b > eps {
                return false;
            }
            continue;
        }
        // Optimum now lies on the line a·p = b: p = p0 + t d.
        let p0 = [a[0] * b / aa, a[1] * b / aa];
        let d = [-a[1], a[0]];
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut restrict = |q: Point, r: f64| -> bool {
            let s = dot(q, d);
            let rhs = r - dot(q, p0);
            if s.abs() <= 1e-300 {
                return rhs <= eps;
            }
            let t = rhs / s;
            if s > 0.0 {
                lo = lo.max(t);
            } else {
                hi = hi.min(t);
            }
            true
        };
        let walls = [
            ([1.0, 0.0], -big),
            ([-1.0, 0.0], -big),
            ([0.0, 1.0], -big),
            ([0.0, -1.0], -big),
        ];
        for (q, r) in walls {
            if !restrict(q, r) {
                return false;
            }
        }
        for &(q, r) in &cons[..i] {
            // Relax by eps so that a feasible point is not lost to rounding.
            if !restrict(q, r - eps) {
                return false;
            }
        }
        if lo > hi + eps / d[0].hypot(d[1]) {
            return false;
        }
        let t = if dot(c, d) >= 0.0 { lo } else { hi };
        let t = if t.is_finite() { t } else if lo.is_finite() { lo } else { hi };
        v = [p0[0] + t * d[0], p0[1] + t * d[1]];
    }
    true
}

// ---------------------------------------------------------------------------
// ABP
// ---------------------------------------------------------------------------

/// One side of the ABP inequality: `sup u± ≤ sup g± + c·diam·(T(‖f∓‖) + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AbpSide {
    pub sup_u: f64,
    pub sup_g: f64,
    /// Discrete `Lⁿ` norm of the relevant part of `f` on the contact set.
    pub f_norm: f64,
    pub contact_nodes: usize,
    /// Smallest `c ≥ 0` making this side hold.
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbpReport {
    /// `sup |u|`.
    pub lhs: f64,
    /// Right-hand side of the global bound with the fitted constant and the
    /// full `‖f‖_{Lⁿ(Ω)}`.
    pub rhs: f64,
    pub g_sup: f64,
    pub f_norm: f64,
    pub diameter: f64,
    pub upper: AbpSide,
    pub lower: AbpSide,
    /// Fitted constant: the larger of the two sides.
    pub constant: f64,
}

const BOUNDARY_SAMPLES: usize = 4096;

/// `max{N^{1/(i+1)}, N^{1/(s+1)}} + 1`.
fn abp_growth(norm: f64, law: &DegeneracyLaw) -> f64 {
    norm.powf(1.0 / (law.i_phi + 1.0)).max(norm.powf(1.0 / (law.s_phi + 1.0))) + 1.0
}

/// Discrete `Lⁿ` norm `(Σ |v|ⁿ hⁿ)^{1/n}` in the plane.
fn discrete_l2(values: impl Iterator<Item = f64>, h: f64) -> f64 {
    (values.map(|v| v * v).sum::<f64>() * h * h).sqrt()
}

/// Fits the smallest ABP constant for a computed `u`.
///
/// The upper side uses `f⁻` on `Γ⁺(u⁺)`, the lower side `f⁺` on `Γ⁺(u⁻)`;
/// `u` is taken at all grid nodes (band values carry the boundary data).
pub fn abp_verify(
    u: &GridFunction,
    grid: &Grid,
    boundary: &BoundaryData,
    f: &Field,
    law: &DegeneracyLaw,
    dom: &Domain,
) -> AbpReport {
    let diam = dom.diameter();
    let g_samples: Vec<f64> = dom
        .boundary_samples(BOUNDARY_SAMPLES)
        .iter()
        .map(|s| boundary.g.eval(s.point))
        .collect();
    let fv: Vec<f64> = grid.interior().iter().map(|&a| f.eval(grid.point(a))).collect();
    let f_at: HashMap<usize, f64> = grid.interior().iter().copied().zip(fv.iter().copied()).collect();

    let support = grid.closure_nodes();
    let side = |sign: f64| -> AbpSide {
        let part: Vec<f64> = u.values.iter().map(|&v| (sign * v).max(0.0)).collect();
        let set = contact_set_on(grid, &part, grid.interior(), &support, None);
        let f_norm = discrete_l2(set.members().map(|(a, _)| (-sign * f_at[&a]).max(0.0)), grid.h);
        let sup_u = grid.interior().iter().map(|&a| part[a]).fold(0.0, f64::max);
        let sup_g = g_samples.iter().map(|&g| (sign * g).max(0.0)).fold(0.0, f64::max);
        let constant = (sup_u - sup_g).max(0.0) / (diam * abp_growth(f_norm, law));
        AbpSide {
            sup_u,
            sup_g,
            f_norm,
            contact_nodes: set.count(),
            constant,
        }
    };
    let upper = side(1.0);
    let lower = side(-1.0);
    let constant = upper.constant.max(lower.constant);
    let g_sup = g_samples.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let f_norm = discrete_l2(fv.iter().copied(), grid.h);
    AbpReport {
        lhs: upper.sup_u.max(lower.sup_u),
        rhs: g_sup + constant * diam * abp_growth(f_norm, law),
        g_sup,
        f_norm,
        diameter: diam,
        upper,
        lower,
        constant,
    }
}

// ---------------------------------------------------------------------------
// Boundary barrier
// ---------------------------------------------------------------------------

/// The boundary barrier `w = (2/δ)·d/(1+d^γ)` (plus a cubic cut-off outside
/// `B_r(center)`), with `d` the distance to `∂Ω`.
#[derive(Debug, Clone)]
pub struct BarrierW<'a> {
    dom: &'a Domain,
    ellipticity: EllipticityPair,
    pub delta: f64,
    pub gamma: f64,
    pub r: f64,
    pub center: Point,
    /// Width of the strip where `d` is `C²`: half the ball-condition radius.
    pub strip: f64,
    /// Bound on `|D²d|` inside the strip.
    pub curvature_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierValue {
    pub value: f64,
    pub gradient: Point,
    /// Upper bound for `P⁺(D²w)`.
    pub pucci_bound: f64,
}

const CURVATURE_SAMPLES: usize = 2048;

impl<'a> BarrierW<'a> {
    pub fn new(
        dom: &'a Domain,
        ellipticity: EllipticityPair,
        delta: f64,
        gamma: f64,
        r: f64,
        center: Point,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::input(format!("barrier exponent γ = {gamma} must lie in (0, 1)")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::input(format!("barrier scale δ = {delta} must be positive")));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::input(format!("cut-off radius r = {r} must lie in (0, 1)")));
        }
        let strip = 0.5 * ball_condition_radius(dom, CURVATURE_SAMPLES)?;
        // The Hessian of d at depth t has eigenvalue −κ/(1 − κt).
        let curvature_bound = dom
            .boundary_samples(CURVATURE_SAMPLES)
            .iter()
            .map(|s| s.curvature.abs() / (1.0 - s.curvature.abs() * strip).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        Ok(BarrierW {
            dom,
            ellipticity,
            delta,
            gamma,
            r,
            center,
            strip,
            curvature_bound,
        })
    }

    /// The `P⁺(D²w)` bound `−2γδ^{γ−2}λ(1+γ)/(1+δ^γ)³ + (2/δ)nKΛ + 6nΛ/(1−r)²`.
    pub fn pucci_bound(&self) -> f64 {
        let (g, d, r) = (self.gamma, self.delta, self.r);
        let n = 2.0;
        let (l, big_l) = (self.ellipticity.lambda(), self.ellipticity.big_lambda());
        -2.0 * g * d.powf(g - 2.0) * l * (1.0 + g) / (1.0 + d.powf(g)).powi(3)
            + (2.0 / d) * n * self.curvature_bound * big_l
            + 6.0 * n * big_l / (1.0 - r).powi(2)
    }

    pub fn at(&self, y: Point) -> Result<BarrierValue> {
        let (sd, proj) = self.dom.closest_boundary_point(y);
        let d = (-sd).max(0.0);
        if d >= self.strip {
            return Err(Error::OutsideStrip { d, strip: self.strip });
        }
        let (g, k) = (self.gamma, 2.0 / self.delta);
        let dg = d.powf(g);
        let mut value = k * d / (1.0 + dg);
        let mut gradient = if d > 0.0 {
            let c = k * (1.0 + (1.0 - g) * dg) / (1.0 + dg).powi(2) / d;
            [c * (y[0] - proj[0]), c * (y[1] - proj[1])]
        } else {
            [0.0, 0.0]
        };
        let rho = dist(y, self.center);
        if rho >= self.r {
            let s = rho - self.r;
            let denom = (1.0 - self.r).powi(3);
            value += s.powi(3) / denom;
            let c = 3.0 * s * s / denom / rho;
            gradient[0] += c * (y[0] - self.center[0]);
            gradient[1] += c * (y[1] - self.center[1]);
        }
        Ok(BarrierValue {
            value,
            gradient,
            pucci_bound: self.pucci_bound(),
        })
    }
}

/// One-shot evaluation of the boundary barrier at `y`.
pub fn barrier_w(
    dom: &Domain,
    ellipticity: EllipticityPair,
    delta: f64,
    gamma: f64,
    r: f64,
    center: Point,
    y: Point,
) -> Result<BarrierValue> {
    BarrierW::new(dom, ellipticity, delta, gamma, r, center)?.at(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceCheck {
    pub checked: usize,
    /// `max (|u − g(π(y))| − (6/δ)·d/(1+d^γ))`; negative values are margins.
    pub max_violation: f64,
    pub worst: Option<Point>,
    pub passed: bool,
}

/// Checks `|u(y) − g(π(y))| ≤ (6/δ)·d(y)/(1+d(y)^γ)` at the interior nodes of
/// `region`, where `π(y)` is the nearest boundary point.
pub fn barrier_distance_check(
    u: &GridFunction,
    grid: &Grid,
    boundary: &BoundaryData,
    delta: f64,
    gamma: f64,
    region: Region,
) -> DistanceCheck {
    let mut checked = 0;
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst = None;
    for &a in grid.interior() {
        let y = grid.point(a);
        if !region.contains(y) {
            continue;
        }
        checked += 1;
        let d = -grid.distance(a);
        let bound = 6.0 / delta * d / (1.0 + d.powf(gamma));
        let v = (u.values[a] - boundary.g.eval(grid.projection(a))).abs() - bound;
        if v > max_violation {
            max_violation = v;
            worst = Some(y);
        }
    }
    DistanceCheck {
        checked,
        max_violation,
        worst,
        passed: max_violation <= 1e-12,
    }
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComparisonMode {
    /// `w` is a strict supersolution: `G(w) ≤ −gap < 0 ≤ G(v)`; no proper
    /// term is needed.
    SmoothSuper { gap: f64 },
    /// The proper term `−εu` (`ε > 0`) supplies the strictness; residual
    /// signs may be violated by `slack`, which costs `slack/ε` in the
    /// conclusion.
    EpsilonProper { slack: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// `None` when the premises hold, otherwise what failed.
    pub premise_violation: Option<String>,
    pub min_sub_residual: f64,
    pub max_super_residual: f64,
    /// `max (v − w)` over the band nodes.
    pub boundary_excess: f64,
    /// `max (v − w)` over the interior nodes.
    pub max_excess: f64,
    pub worst: Option<Point>,
    pub tolerance: f64,
    /// Premises hold and `v ≤ w + tolerance` in the interior.
    pub passed: bool,
}

impl ComparisonReport {
    pub fn premise_holds(&self) -> bool {
        self.premise_violation.is_none()
    }
}

/// Checks the discrete comparison principle for a subsolution `v` and a
/// supersolution `w` of the scheme with parameters `params`.
pub fn comparison_verify(
    v: &GridFunction,
    w: &GridFunction,
    disc: &Discretization,
    params: &SchemeParams,
    mode: ComparisonMode,
) -> ComparisonReport {
    let grid = &disc.grid;
    let gv = disc.residual(v, params);
    let gw = disc.residual(w, params);
    let min_sub = gv.iter().copied().fold(f64::INFINITY, f64::min);
    let max_super = gw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let boundary_excess = (0..grid.len())
        .filter(|&a| grid.kind(a) == NodeKind::Band)
        .map(|a| v.values[a] - w.values[a])
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = v.sup_norm().max(w.sup_norm()).max(1.0);
    // Rounding allowance on residual signs.
    let roundoff = 1e-10
        * (0..disc.interior_len())
            .map(|k| disc.forcing(k).abs())
            .fold(1.0, f64::max);
    let mut premise = Vec::new();
    let tolerance = match mode {
        ComparisonMode::SmoothSuper { gap } => {
            if !(gap > 0.0) {
                premise.push(format!("gap {gap} is not positive"));
            }
            if min_sub < -roundoff {
                premise.push(format!("subsolution residual reaches {min_sub:e} < 0"));
            }
            if max_super > -gap + roundoff {
                premise.push(format!("supersolution residual reaches {max_super:e} > −{gap:e}"));
            }
            1e-9 * scale
        }
        ComparisonMode::EpsilonProper { slack } => {
            if !(params.epsilon > 0.0) {
                premise.push("proper term ε is not positive".to_string());
            }
            if min_sub < -slack - roundoff {
                premise.push(format!("subsolution residual reaches {min_sub:e} < −{slack:e}"));
            }
            if max_super > slack + roundoff {
                premise.push(format!("supersolution residual reaches {max_super:e} > {slack:e}"));
            }
            2.0 * slack / params.epsilon.max(f64::MIN_POSITIVE) + 1e-9 * scale
        }
    };
    if boundary_excess > 1e-12 * scale {
        premise.push(format!("v exceeds w by {boundary_excess:e} on the boundary band"));
    }
    let (max_excess, worst) = grid
        .interior()
        .iter()
        .map(|&a| (v.values[a] - w.values[a], a))
        .fold((f64::NEG_INFINITY, None), |(m, at), (e, a)| {
            if e > m {
                (e, Some(grid.point(a)))
            } else {
                (m, at)
            }
        });
    let premise_violation = (!premise.is_empty()).then(|| premise.join("; "));
    ComparisonReport {
        passed: premise_violation.is_none() && max_excess <= tolerance,
        premise_violation,
        min_sub_residual: min_sub,
        max_super_residual: max_super,
        boundary_excess,
        max_excess,
        worst,
        tolerance,
    }
}

// ---------------------------------------------------------------------------
// Smallness regime
// ---------------------------------------------------------------------------

/// `K = 2(1 + ‖u‖∞ + ‖g‖_{C^{1,β}} + [(L/ν₀)‖f‖∞]^{1/(1+i)})` and
/// `r = ε₀^{1/(2+i)}`.
pub fn smallness_constants(u_sup: f64, g_c1beta: f64, f_sup: f64, law: &DegeneracyLaw, eps0: f64) -> (f64, f64) {
    let i = law.i_phi;
    let k = 2.0 * (1.0 + u_sup + g_c1beta + (law.l / law.nu0 * f_sup).powf(1.0 / (1.0 + i)));
    (k, eps0.powf(1.0 / (2.0 + i)))
}

/// The problem seen from `B_r(x₀)` after dividing by `K`.
#[derive(Debug, Clone)]
pub struct Smallness {
    pub k: f64,
    pub r: f64,
    pub eps0: f64,
    /// `Φ̄(y,t) = Φ(ry+x₀, (K/r)t)/Φ(ry+x₀, K/r)`.
    pub law: DegeneracyLaw,
    /// `(y, ū(y))` at the grid nodes of `B_r(x₀) ∩ Ω̄`, in rescaled coordinates.
    pub u: Vec<(Point, f64)>,
    pub u_sup: f64,
    /// `sup |f̄|` over nodes and a sampling lattice of the rescaled region.
    pub f_sup: f64,
    /// `‖ḡ‖_{C^{1,β}} ≤ ‖g‖_{C^{1,β}}/K`.
    pub g_norm: f64,
    /// `‖ū‖∞ ≤ 1`, `‖ḡ‖ ≤ 1` and `‖f̄‖∞ ≤ ε₀`.
    pub passed: bool,
}

const SMALLNESS_SAMPLES: usize = 1024;

/// Rescales a computed solution into the smallness regime around `x0`.
#[allow(clippy::too_many_arguments)]
pub fn smallness_rescale(
    u: &GridFunction,
    grid: &Grid,
    f: &Field,
    boundary: &BoundaryData,
    law: &DegeneracyLaw,
    dom: &Domain,
    eps0: f64,
    x0: Point,
) -> Result<Smallness> {
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return Err(Error::input(format!("ε₀ = {eps0} must lie in (0, 1)")));
    }
    let closure = grid.closure_nodes();
    let u_sup = closure.iter().fold(0.0f64, |m, &a| m.max(u.values[a].abs()));
    // Sample f on the nodes and on a finer lattice of the domain.
    let [x_lo, y_lo, x_hi, y_hi] = dom.bounding_box();
    let m = 96;
    let mut f_points: Vec<Point> = closure.iter().map(|&a| grid.point(a)).collect();
    for i in 0..=m {
        for j in 0..=m {
            let x = [
                x_lo + (x_hi - x_lo) * i as f64 / m as f64,
                y_lo + (y_hi - y_lo) * j as f64 / m as f64,
            ];
            if dom.contains(x) {
                f_points.push(x);
            }
        }
    }
    let f_sup = f_points.iter().fold(0.0f64, |s, &x| s.max(f.eval(x).abs()));
    let g_c1beta = boundary.c1beta_norm(dom, SMALLNESS_SAMPLES);
    let (k, r) = smallness_constants(u_sup, g_c1beta, f_sup, law, eps0);
    let law_bar = degeneracy::rescale_smallness(law, x0, r, k)?;

    let to_local = |x: Point| [(x[0] - x0[0]) / r, (x[1] - x0[1]) / r];
    let u_bar: Vec<(Point, f64)> = closure
        .iter()
        .filter(|&&a| dist(grid.point(a), x0) < r)
        .map(|&a| (to_local(grid.point(a)), u.values[a] / k))
        .collect();
    let u_bar_sup = u_bar.iter().fold(0.0f64, |s, v| s.max(v.1.abs()));
    let mut f_bar_sup = 0.0f64;
    for &x in f_points.iter().filter(|&&x| dist(x, x0) < r) {
        let phi = law.eval(x, k / r)?;
        f_bar_sup = f_bar_sup.max((r * r * f.eval(x) / (phi * k)).abs());
    }
    let g_norm = g_c1beta / k;
    Ok(Smallness {
        k,
        r,
        eps0,
        law: law_bar,
        u: u_bar,
        u_sup: u_bar_sup,
        f_sup: f_bar_sup,
        g_norm,
        passed: u_bar_sup <= 1.0 && g_norm <= 1.0 && f_bar_sup <= eps0,
    })
}

// ---------------------------------------------------------------------------
// Regularity exponents
// ---------------------------------------------------------------------------

/// Default Krylov–Safonov exponent; the true value is only known to exist, so
/// the default is chosen not to bind.
pub const DEFAULT_ALPHA_BAR: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityTarget {
    pub alpha_bar: f64,
    /// `true` when `alpha_bar` is the non-binding default rather than a value
    /// supplied by the caller.
    pub alpha_bar_is_default: bool,
    /// Supremum of the admissible exponents.
    pub alpha_max: f64,
    /// Whether `alpha_max` itself is admissible (the closed bound binds).
    pub attained: bool,
}

/// Admissible Hölder exponents of the gradient:
/// `(0, ᾱ) ∩ (0, 1/(1+s)] ∩ (0, β_g)` when `i ≥ 0` and
/// `(0, ᾱ) ∩ (0, 1/(1+s−i)] ∩ (0, β_g)` when `−1 < i < 0`.
/// Pass `None` for `alpha_bar` to use [`DEFAULT_ALPHA_BAR`].
pub fn alpha_admissible(law: &DegeneracyLaw, beta_g: f64, alpha_bar: Option<f64>) -> Result<RegularityTarget> {
    if !(beta_g > 0.0 && beta_g < 1.0 || beta_g == 1.0) {
        return Err(Error::input(format!("β_g = {beta_g} must lie in (0, 1]")));
    }
    let bar = alpha_bar.unwrap_or(DEFAULT_ALPHA_BAR);
    if !(bar > 0.0 && bar <= 1.0) {
        return Err(Error::input(format!("ᾱ = {bar} must lie in (0, 1]")));
    }
    let (i, s) = (law.i_phi, law.s_phi);
    let closed = if i >= 0.0 { 1.0 / (1.0 + s) } else { 1.0 / (1.0 + s - i) };
    let open = bar.min(beta_g);
    Ok(RegularityTarget {
        alpha_bar: bar,
        alpha_bar_is_default: alpha_bar.is_none(),
        alpha_max: closed.min(open),
        attained: closed < open,
    })
}

/// Affine approximations `l_k(y) = a_k + b_k·(y − center)` on the shrinking
/// balls `B_{ρ^k}(center) ∩ Ω̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTracker {
    pub center: Point,
    pub rho: f64,
    /// `(a_k, b_k)` for `k = 1, …, k_max`.
    pub coefficients: Vec<(f64, Point)>,
    pub radii: Vec<f64>,
    /// `sup |u − l_k|` on the k-th ball.
    pub errors: Vec<f64>,
    pub nodes: Vec<usize>,
    /// Fitted exponent: slope of `log e_k` against `log ρ^k`, minus one,
    /// capped at `alpha_cap`.
    pub alpha_fit: f64,
    /// Smallest `C₀` with `|a_k − a_{k−1}| ≤ C₀ρ^{(k−1)(1+α)}` and
    /// `|b_k − b_{k−1}| ≤ C₀ρ^{(k−1)α}` at the fitted `α`.
    pub c0_fit: f64,
}

/// Fits `l_k` by least squares on each ball and measures the decay of the
/// sup-norm errors.
pub fn affine_fit_sequence(
    u: &GridFunction,
    grid: &Grid,
    center: Point,
    rho: f64,
    k_max: u32,
    alpha_cap: f64,
) -> Result<AffineTracker> {
    if !(rho > 0.0 && rho < 1.0) || k_max < 2 {
        return Err(Error::input(format!("need ρ ∈ (0, 1) and k_max ≥ 2, got ρ = {rho}, k_max = {k_max}")));
    }
    let smallest = rho.powi(k_max as i32);
    if smallest < 4.0 * grid.h {
        return Err(Error::Resolution(format!(
            "ρ^k_max = {smallest:.3e} is below 4h = {:.3e}",
            4.0 * grid.h
        )));
    }
    let closure = grid.closure_nodes();
    let mut coefficients = Vec::new();
    let mut radii = Vec::new();
    let mut errors = Vec::new();
    let mut nodes = Vec::new();
    for k in 1..=k_max {
        let radius = rho.powi(k as i32);
        let pts: Vec<(Point, f64)> = closure
            .iter()
            .filter(|&&a| dist(grid.point(a), center) <= radius)
            .map(|&a| {
                let x = grid.point(a);
                ([(x[0] - center[0]) / radius, (x[1] - center[1]) / radius], u.values[a])
            })
            .collect();
        if pts.len() < 6 {
            return Err(Error::Resolution(format!("only {} nodes in the ball of radius {radius:.3e}", pts.len())));
        }
        let (a, b) = least_squares_affine(&pts)?;
        let b = [b[0] / radius, b[1] / radius];
        let err = pts
            .iter()
            .map(|(y, v)| (v - a - radius * (b[0] * y[0] + b[1] * y[1])).abs())
            .fold(0.0, f64::max);
        coefficients.push((a, b));
        radii.push(radius);
        errors.push(err);
        nodes.push(pts.len());
    }
    let scale = closure.iter().fold(1.0f64, |m, &a| m.max(u.values[a].abs()));
    let positive: Vec<(f64, f64)> = radii
        .iter()
        .zip(&errors)
        .filter(|(_, &e)| e > 1e-12 * scale)
        .map(|(r, e)| (r.ln(), e.ln()))
        .collect();
    let alpha_fit = if positive.len() < 2 {
        alpha_cap
    } else {
        (linear_slope(&positive) - 1.0).min(alpha_cap)
    };
    let mut c0_fit = 0.0f64;
    for k in 1..coefficients.len() {
        let (a1, b1) = coefficients[k];
        let (a0, b0) = coefficients[k - 1];
        let base = radii[k - 1];
        c0_fit = c0_fit
            .max((a1 - a0).abs() / base.powf(1.0 + alpha_fit))
            .max((b1[0] - b0[0]).hypot(b1[1] - b0[1]) / base.powf(alpha_fit));
    }
    Ok(AffineTracker {
        center,
        rho,
        coefficients,
        radii,
        errors,
        nodes,
        alpha_fit,
        c0_fit,
    })
}

/// Least-squares `v ≈ a + b·y` through the normal equations.
fn least_squares_affine(pts: &[(Point, f64)]) -> Result<(f64, Point)> {
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for &(y, v) in pts {
        let phi = [1.0, y[0], y[1]];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += phi[i] * phi[j];
            }
            r[i] += phi[i] * v;
        }
    }
    let c = solve3(m, r).ok_or_else(|| Error::Resolution("degenerate node set for an affine fit".into()))?;
    Ok((c[0], [c[1], c[2]]))
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for j in col..3 {
                m[row][j] -= f * m[col][j];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|j| m[row][j] * x[j]).sum();
        x[row] = (r[row] - s) / m[row][row];
    }
    Some(x)
}

/// Slope of the least-squares line through `(x, y)` pairs.
fn linear_slope(xy: &[(f64, f64)]) -> f64 {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

// ---------------------------------------------------------------------------
// Lipschitz bounds
// ---------------------------------------------------------------------------

/// `max |u(x) − u(y)|/|x − y|` over pairs of nodes of `Ω̄ ∩ region` at most
/// `radius_cap` apart.
pub fn lipschitz_estimate(u: &GridFunction, grid: &Grid, region: Region, radius_cap: f64) -> f64 {
    let closure = grid.closure_nodes();
    let mut inside = vec![false; grid.len()];
    for &a in &closure {
        inside[a] = region.contains(grid.point(a));
    }
    let reach = (radius_cap / grid.h).floor().max(1.0) as i64;
    let offsets: Vec<[i64; 2]> = (-reach..=reach)
        .flat_map(|i| (0..=reach).map(move |j| [i, j]))
        .filter(|&[i, j]| (j > 0 || i > 0) && ((i * i + j * j) as f64).sqrt() * grid.h <= radius_cap.max(grid.h))
        .collect();
    closure
        .par_iter()
        .filter(|&&a| inside[a])
        .map(|&a| {
            let ij = grid.lattice(a);
            let mut best = 0.0f64;
            for off in &offsets {
                if let Some(b) = grid.active_at([ij[0] + off[0], ij[1] + off[1]]) {
                    if inside[b] {
                        let len = ((off[0] * off[0] + off[1] * off[1]) as f64).sqrt() * grid.h;
                        best = best.max((u.values[a] - u.values[b]).abs() / len);
                    }
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// The capped modulus `ω(s) = s − ω₀s^{3/2}` for `s ≤ s₀ = (2/(3ω₀))²`,
/// `ω(s₀)` beyond.
pub fn modulus_omega(s: f64, omega0: f64) -> f64 {
    let s0 = (2.0 / (3.0 * omega0)).powi(2);
    let t = s.clamp(0.0, s0);
    t - omega0 * t.powf(1.5)
}

/// `ω′(s)`: `1 − (3/2)ω₀√s` below the cap, zero beyond.
pub fn modulus_omega_derivative(s: f64, omega0: f64) -> f64 {
    let s0 = (2.0 / (3.0 * omega0)).powi(2);
    if s >= s0 {
        0.0
    } else {
        1.0 - 1.5 * omega0 * s.max(0.0).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use rand::Rng;

    fn ball_grid(h: f64) -> (Domain, Grid) {
        let dom = Domain::ball([0.0, 0.0], 1.0).unwrap();
        let grid = build_grid(&dom, h, 2).unwrap();
        (dom, grid)
    }

    #[test]
    fn concave_data_touches_everywhere() {
        let (_, grid) = ball_grid(0.1);
        let u = GridFunction::from_fn(&grid, |x| 1.0 - x[0] * x[0] - 2.0 * x[1] * x[1]);
        let set = upper_contact_set(&u, &grid, None);
        assert_eq!(set.count(), grid.interior().len());
        // Slopes are the gradients.
        for (a, p) in set.members() {
            let x = grid.point(a);
            assert!((p[0] + 2.0 * x[0]).abs() < 0.21 && (p[1] + 4.0 * x[1]).abs() < 0.41);
        }
    }

    #[test]
    fn convex_data_touches_only_the_rim() {
        let (_, grid) = ball_grid(0.1);
        let u = GridFunction::from_fn(&grid, |x| x[0] * x[0] + x[1] * x[1]);
        let set = upper_contact_set(&u, &grid, None);
        assert_eq!(set.count(), 0);
    }

    #[test]
    fn affine_data_touches_with_its_slope() {
        let (_, grid) = ball_grid(0.1);
        let u = GridFunction::from_fn(&grid, |x| 0.5 + 2.0 * x[0] - 3.0 * x[1]);
        let set = upper_contact_set(&u, &grid, None);
        assert_eq!(set.count(), grid.interior().len());
        for (_, p) in set.members() {
            assert!((p[0] - 2.0).abs() < 1e-6 && (p[1] + 3.0).abs() < 1e-6, "{p:?}");
        }
    }

    #[test]
    fn slope_bound_restricts_the_set() {
        let (_, grid) = ball_grid(0.1);
        let u = GridFunction::from_fn(&grid, |x| -(x[0] * x[0] + x[1] * x[1]));
        let set = upper_contact_set(&u, &grid, Some(1.0));
        for (a, p) in set.members() {
            assert!(p[0].hypot(p[1]) <= 1.0 + 1e-12);
            assert!(grid.point(a)[0].hypot(grid.point(a)[1]) < 0.6);
        }
        assert!(set.count() < grid.interior().len());
    }

    #[test]
    fn agrees_with_brute_force_on_random_data() {
        let (_, grid) = ball_grid(0.125);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = GridFunction::from_fn(&grid, |x| {
                c[0] * (3.0 * x[0]).sin() + c[1] * (2.0 * x[1]).cos() + c[2] * x[0] * x[1]
                    + c[3] * x[0] * x[0]
                    + c[4] * (x[0] + x[1]).powi(3)
                    + c[5]
            });
            let set = upper_contact_set(&u, &grid, None);
            let support: Vec<usize> = (0..grid.len()).collect();
            let pts: Vec<Point> = support.iter().map(|&a| grid.point(a)).collect();
            let vals: Vec<f64> = support.iter().map(|&a| u.values[a]).collect();
            let brute = contact_mask_brute_force(&pts, &vals, set.tolerance);
            let at: HashMap<usize, bool> = support.iter().copied().zip(brute).collect();
            let expected: Vec<bool> = set.nodes.iter().map(|&a| at[&a]).collect();
            assert_eq!(expected, set.mask);
        }
    }

    #[test]
    fn abp_zero_data_fits_zero() {
        let (dom, grid) = ball_grid(0.1);
        let u = GridFunction::zeros(&grid);
        let g = BoundaryData::new(Field::constant(0.0), 0.5).unwrap();
        let r = abp_verify(&u, &grid, &g, &Field::constant(0.0), &DegeneracyLaw::power(0.0).unwrap(), &dom);
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.constant, 0.0);
    }

    #[test]
    fn abp_laplacian_model_constant() {
        let (dom, grid) = ball_grid(1.0 / 64.0);
        let u = GridFunction::from_fn(&grid, |x| (x[0] * x[0] + x[1] * x[1] - 1.0) / 4.0);
        let g = BoundaryData::new(Field::constant(0.0), 0.5).unwrap();
        let r = abp_verify(&u, &grid, &g, &Field::constant(1.0), &DegeneracyLaw::power(0.0).unwrap(), &dom);
        let pi = std::f64::consts::PI;
        assert!((r.lhs - 0.25).abs() < 1e-3);
        assert!((r.f_norm - pi.sqrt()).abs() < 0.03, "{}", r.f_norm);
        let expected = 0.25 / (2.0 * (pi.sqrt() + 1.0));
        assert!((r.constant - expected).abs() < 0.02 * expected, "{} vs {expected}", r.constant);
        assert!(r.rhs >= r.lhs);
        assert_eq!(r.upper.constant, 0.0);
    }

    fn unit_pair() -> EllipticityPair {
        EllipticityPair::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn barrier_vanishes_on_the_boundary() {
        let dom = Domain::ball([0.0, 0.0], 1.0).unwrap();
        // Boundary point with |y − c| < r.
        let b = barrier_w(&dom, unit_pair(), 0.25, 0.5, 0.7, [1.0, 0.0], [0.8, 0.6]).unwrap();
        assert!(b.value.abs() < 1e-12);
    }

    #[test]
    fn barrier_value_at_depth_delta() {
        let dom = Domain::ball([0.0, 0.0], 1.0).unwrap();
        // |y − c| = 0.25 < r with d = δ = 1/4.
        let b = barrier_w(&dom, unit_pair(), 0.25, 0.5, 0.5, [1.0, 0.0], [0.75, 0.0]).unwrap();
        assert!((b.value - 4.0 / 3.0).abs() < 1e-12, "{}", b.value);
    }

    #[test]
    fn barrier_gradient_matches_differences_and_bound() {
        let dom = Domain::ball([0.0, 0.0], 1.0).unwrap();
        let r = 0.4;
        let delta = (1.0 - r) / 3.0;
        let w = BarrierW::new(&dom, unit_pair(), delta, 0.5, r, [1.0, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let rho = rng.gen_range(0.55..0.999);
            let th = rng.gen_range(-0.6..0.6f64);
            let y = [rho * th.cos(), rho * th.sin()];
            let b = w.at(y).unwrap();
            let s = 1e-6;
            let fd = [
                (w.at([y[0] + s, y[1]]).unwrap().value - w.at([y[0] - s, y[1]]).unwrap().value) / (2.0 * s),
                (w.at([y[0], y[1] + s]).unwrap().value - w.at([y[0], y[1] - s]).unwrap().value) / (2.0 * s),
            ];
            assert!((fd[0] - b.gradient[0]).abs() < 1e-5 && (fd[1] - b.gradient[1]).abs() < 1e-5);
            if dist(y, [1.0, 0.0]) < r {
                assert!(b.gradient[0].hypot(b.gradient[1]) <= 3.0 / delta);
            }
        }
        assert!(matches!(w.at([0.0, 0.0]), Err(Error::OutsideStrip { .. })));
    }

    #[test]
    fn barrier_bound_turns_negative_for_small_delta() {
        let dom = Domain::ball([0.0, 0.0], 1.0).unwrap();
        let w = BarrierW::new(&dom, unit_pair(), 1e-4, 0.5, 0.5, [1.0, 0.0]).unwrap();
        assert!(w.pucci_bound() < 0.0);
        let w = BarrierW::new(&dom, unit_pair(), 0.5, 0.5, 0.5, [1.0, 0.0]).unwrap();
        assert!(w.pucci_bound() > 0.0);
    }

    #[test]
    fn distance_check_on_laplacian_model_and_corruption() {
        let (_, grid) = ball_grid(0.05);
        let g = BoundaryData::new(Field::constant(0.0), 0.5).unwrap();
        let mut u = GridFunction::from_fn(&grid, |x| (x[0] * x[0] + x[1] * x[1] - 1.0) / 4.0);
        let ok = barrier_distance_check(&u, &grid, &g, 0.25, 0.5, Region::Whole);
        assert!(ok.passed && ok.checked == grid.interior().len());
        let same = GridFunction::zeros(&grid);
        assert!(barrier_distance_check(&same, &grid, &g, 0.25, 0.5, Region::Whole).passed);
        let near = *grid
            .interior()
            .iter()
            .max_by(|&&a, &&b| grid.distance(a).partial_cmp(&grid.distance(b)).unwrap())
            .unwrap();
        u.values[near] += 1.0;
        let bad = barrier_distance_check(&u, &grid, &g, 0.25, 0.5, Region::Whole);
        assert!(!bad.passed && bad.worst == Some(grid.point(near)));
    }

    #[test]
    fn smallness_constants_by_formula() {
        let p0 = DegeneracyLaw::power(0.0).unwrap();
        assert_eq!(smallness_constants(0.0, 0.0, 0.0, &p0, 0.5).0, 2.0);
        assert!((smallness_constants(1.0, 1.0, 1.0, &p0, 0.5).0 - 8.0).abs() < 1e-12);
        assert!((smallness_constants(0.0, 0.0, 0.0, &p0, 1e-2).1 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn smallness_rescale_lands_in_the_regime() {
        let (dom, grid) = ball_grid(0.05);
        let law = DegeneracyLaw::power(2.0).unwrap();
        let f = Field::from_fn(|x| 5.0 * (1.0 + x[0]));
        let g = BoundaryData::new(Field::from_fn(|x| x[0] * x[1]), 0.5).unwrap();
        let u = GridFunction::from_fn(&grid, |x| 3.0 * x[0] - x[1] * x[1]);
        let s = smallness_rescale(&u, &grid, &f, &g, &law, &dom, 0.05, [1.0, 0.0]).unwrap();
        assert!(s.passed, "{s:?}");
        assert!((s.r - 0.05f64.powf(0.25)).abs() < 1e-12);
        assert!(s.law.is_normalized());
        assert!(!s.u.is_empty());
    }

    #[test]
    fn comparison_modes_and_premises() {
        use crate::operators::OperatorSpec;
        use crate::scheme::{Problem, Stencil};
        let problem = Problem {
            domain: Domain::ball([0.0, 0.0], 1.0).unwrap(),
            operator: OperatorSpec::laplacian(2),
            law: DegeneracyLaw::power(0.0).unwrap(),
            f: Field::constant(1.0),
            boundary: BoundaryData::new(Field::constant(0.0), 0.5).unwrap(),
        };
        let disc = Discretization::new(problem, 0.1, Stencil::lattice(1).unwrap()).unwrap();
        // Δv = 1 exactly (sub), Δw = 0 ≤ 1 − 1 (strict super with gap 1).
        let v = disc.grid_function(|x| (x[0] * x[0] + x[1] * x[1] - 1.0) / 4.0);
        let w = disc.grid_function(|_| 0.0);
        let params = SchemeParams::new(1e-8, 0.0).unwrap();
        let ok = comparison_verify(&v, &w, &disc, &params, ComparisonMode::SmoothSuper { gap: 0.5 });
        assert!(ok.passed, "{ok:?}");
        let same = comparison_verify(&v, &v, &disc, &SchemeParams::new(1e-8, 0.1).unwrap(), ComparisonMode::EpsilonProper { slack: 0.03 });
        assert!(same.passed && same.max_excess == 0.0, "{same:?}");
        let swapped = comparison_verify(&w, &v, &disc, &params, ComparisonMode::SmoothSuper { gap: 0.5 });
        assert!(!swapped.passed && !swapped.premise_holds());
    }

    #[test]
    fn admissible_exponents() {
        let d = |i: f64, s: f64| {
            DegeneracyLaw::declared(crate::degeneracy::LawKind::Power { p: i }, i, s, 1.0, 1.0, 1.0).unwrap()
        };
        let t = alpha_admissible(&d(0.0, 1.0), 0.9, Some(0.6)).unwrap();
        assert_eq!((t.alpha_max, t.attained), (0.5, true));
        let t = alpha_admissible(&DegeneracyLaw::power(-0.5).unwrap(), 0.95, Some(0.6)).unwrap();
        assert_eq!((t.alpha_max, t.attained), (0.6, false));
        let t = alpha_admissible(&DegeneracyLaw::power(2.0).unwrap(), 1.0, Some(1.0)).unwrap();
        assert!((t.alpha_max - 1.0 / 3.0).abs() < 1e-15 && t.attained);
        let t = alpha_admissible(&d(0.0, 0.0), 0.5, None).unwrap();
        assert!(t.alpha_bar_is_default && t.alpha_max == 0.5 && !t.attained);
    }

    #[test]
    fn affine_fits_measure_gradient_holder_exponent() {
        let dom = Domain::ball([1.0, 0.0], 1.0).unwrap();
        // The sup errors of discrete fits decay slightly faster than the
        // continuum rate until each ball holds a few thousand nodes.
        let grid = build_grid(&dom, 1.0 / 512.0, 2).unwrap();
        let flat = GridFunction::from_fn(&grid, |x| 1.0 + 2.0 * x[0] - x[1]);
        let t = affine_fit_sequence(&flat, &grid, [0.0, 0.0], 0.5, 5, 1.0).unwrap();
        assert!(t.errors.iter().all(|&e| e < 1e-12) && t.alpha_fit == 1.0);
        let sharp = GridFunction::from_fn(&grid, |x| (x[0] * x[0] + x[1] * x[1]).powf(2.0 / 3.0));
        let t = affine_fit_sequence(&sharp, &grid, [0.0, 0.0], 0.5, 5, 1.0).unwrap();
        assert!((t.alpha_fit - 1.0 / 3.0).abs() < 0.05, "{} {:?}", t.alpha_fit, t.errors);
        let smooth = GridFunction::from_fn(&grid, |x| x[0] * x[0] + x[1] * x[1]);
        let t = affine_fit_sequence(&smooth, &grid, [0.0, 0.0], 0.5, 5, 1.0).unwrap();
        assert!(t.alpha_fit >= 0.95, "{}", t.alpha_fit);
        assert!(matches!(
            affine_fit_sequence(&smooth, &grid, [0.0, 0.0], 0.5, 8, 1.0),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn lipschitz_of_affine_and_cone() {
        let (_, grid) = ball_grid(0.05);
        let u = GridFunction::from_fn(&grid, |x| 2.0 * x[0] - 2.0 * x[1]);
        let l = lipschitz_estimate(&u, &grid, Region::Whole, 0.2);
        assert!((l - 8f64.sqrt()).abs() < 1e-9, "{l}");
        let cone = GridFunction::from_fn(&grid, |x| x[0].hypot(x[1]));
        let region = Region::Ball { center: [0.5, 0.0], radius: 0.3 };
        let l = lipschitz_estimate(&cone, &grid, region, 0.1);
        assert!(l <= 1.0 + 1e-12 && l > 1.0 - 0.05, "{l}");
    }

    #[test]
    fn modulus_values_and_junction() {
        assert_eq!(modulus_omega(0.0, 2.0 / 3.0), 0.0);
        assert!((modulus_omega(1.0, 2.0 / 3.0) - 1.0 / 3.0).abs() < 1e-12);
        assert!((modulus_omega(2.0, 2.0 / 3.0) - 1.0 / 3.0).abs() < 1e-12);
        assert!(modulus_omega_derivative(1.0 - 1e-12, 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn seidel_detects_simple_infeasibility() {
        // p₁ ≥ 1 and −p₁ ≥ 0.
        let cons = [([1.0, 0.0], 1.0), ([-1.0, 0.0], 0.0)];
        assert!(!seidel_feasible(&cons, 10.0, 1e-12));
        let cons = [([1.0, 0.0], 1.0), ([-1.0, 0.0], -2.0)];
        assert!(seidel_feasible(&cons, 10.0, 1e-12));
    }
}
