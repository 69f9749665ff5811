//! Domains described by signed distance, their ball condition, Cartesian
//! grids and Dirichlet data.

use crate::{Error, Field, Point, Result};

#[inline]
fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

#[inline]
fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

/// Boundary graph `x₂ = a x₁²` of a half-graph chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Graph {
    pub a: f64,
}

impl Graph {
    pub fn value(&self, s: f64) -> f64 {
        self.a * s * s
    }

    pub fn slope(&self, s: f64) -> f64 {
        2.0 * self.a * s
    }

    /// `‖φ''‖∞`.
    pub fn hessian_bound(&self) -> f64 {
        2.0 * self.a.abs()
    }

    /// Closest point on the graph: real roots of `2a²s³ + (1 − 2a x₂)s − x₁ = 0`
    /// polished by Newton's method.
    fn closest(&self, x: Point) -> Point {
        let a = self.a;
        if a == 0.0 {
            return [x[0], 0.0];
        }
        let c3 = 2.0 * a * a;
        let c1 = 1.0 - 2.0 * a * x[1];
        let c0 = -x[0];
        let f = |s: f64| c3 * s * s * s + c1 * s + c0;
        let df = |s: f64| 3.0 * c3 * s * s + c1;
        let mut candidates = cubic_real_roots(c3, c1, c0);
        for s in candidates.iter_mut() {
            for _ in 0..8 {
                let d = df(*s);
                if d == 0.0 {
                    break;
                }
                let step = f(*s) / d;
                *s -= step;
                if step.abs() <= 1e-16 * (1.0 + s.abs()) {
                    break;
                }
            }
        }
        candidates
            .into_iter()
            .map(|s| [s, self.value(s)])
            .min_by(|p, q| norm(sub(*p, x)).total_cmp(&norm(sub(*q, x))))
            .unwrap_or([x[0], self.value(x[0])])
    }
}

/// Real roots of `c3 s³ + c1 s + c0` (depressed cubic), `c3 > 0`.
fn cubic_real_roots(c3: f64, c1: f64, c0: f64) -> Vec<f64> {
    let p = c1 / c3;
    let q = c0 / c3;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc >= 0.0 {
        let sq = disc.sqrt();
        vec![(-q / 2.0 + sq).cbrt() + (-q / 2.0 - sq).cbrt()]
    } else {
        let r = (-p / 3.0).sqrt();
        let phi = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0).acos();
        (0..3)
            .map(|k| 2.0 * r * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    Ball {
        center: Point,
        radius: f64,
    },
    Annulus {
        center: Point,
        r_in: f64,
        r_out: f64,
    },
    /// Axis-aligned ellipse with semi-axes `a` (along x₁) and `b`.
    Ellipse {
        center: Point,
        a: f64,
        b: f64,
    },
    /// `{x₂ > φ(x₁)}` seen through the window `|x₁| < half_width`, `x₂ < top`.
    /// Distances refer to the graph; the window only bounds grids.
    HalfGraph {
        graph: Graph,
        half_width: f64,
        top: f64,
    },
}

/// A bounded `C^{1,1}` domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub kind: DomainKind,
}

/// A sampled boundary point with outward unit normal and signed curvature
/// (positive where the domain is locally convex).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub point: Point,
    pub normal: Point,
    pub curvature: f64,
}

impl Domain {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::DegenerateDomain(format!("ball radius {radius}")));
        }
        Ok(Domain {
            kind: DomainKind::Ball { center, radius },
        })
    }

    pub fn annulus(center: Point, r_in: f64, r_out: f64) -> Result<Self> {
        if !(r_in > 0.0 && r_out > r_in) {
            return Err(Error::DegenerateDomain(format!(
                "annulus radii {r_in}, {r_out}"
            )));
        }
        Ok(Domain {
            kind: DomainKind::Annulus {
                center,
                r_in,
                r_out,
            },
        })
    }

    pub fn ellipse(center: Point, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::DegenerateDomain(format!(
                "ellipse semi-axes {a}, {b}"
            )));
        }
        Ok(Domain {
            kind: DomainKind::Ellipse { center, a, b },
        })
    }

    pub fn half_graph(graph: Graph, half_width: f64, top: f64) -> Result<Self> {
        if !(half_width > 0.0 && top > graph.value(half_width).max(0.0)) {
            return Err(Error::DegenerateDomain("half-graph window is empty".into()));
        }
        Ok(Domain {
            kind: DomainKind::HalfGraph {
                graph,
                half_width,
                top,
            },
        })
    }

    /// `[x_min, y_min, x_max, y_max]`.
    pub fn bounding_box(&self) -> [f64; 4] {
        match self.kind {
            DomainKind::Ball {
                center: c,
                radius: r,
            }
            | DomainKind::Annulus {
                center: c,
                r_out: r,
                ..
            } => [c[0] - r, c[1] - r, c[0] + r, c[1] + r],
            DomainKind::Ellipse { center: c, a, b } => [c[0] - a, c[1] - b, c[0] + a, c[1] + b],
            DomainKind::HalfGraph {
                graph,
                half_width: w,
                top,
            } => {
                let lo = graph.value(0.0).min(graph.value(w));
                [-w, lo, w, top]
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.kind {
            DomainKind::Ball { radius, .. } => 2.0 * radius,
            DomainKind::Annulus { r_out, .. } => 2.0 * r_out,
            DomainKind::Ellipse { a, b, .. } => 2.0 * a.max(b),
            DomainKind::HalfGraph { .. } => {
                let bb = self.bounding_box();
                (bb[2] - bb[0]).hypot(bb[3] - bb[1])
            }
        }
    }

    /// Signed distance to `∂Ω`, negative inside. For half-graph charts this is
    /// the signed distance to the graph.
    pub fn signed_distance(&self, x: Point) -> f64 {
        self.closest_boundary_point(x).0
    }

    /// Signed distance together with the nearest boundary point.
    pub fn closest_boundary_point(&self, x: Point) -> (f64, Point) {
        match self.kind {
            DomainKind::Ball { center, radius } => {
                let v = sub(x, center);
                let r = norm(v);
                let dir = if r > 0.0 {
                    [v[0] / r, v[1] / r]
                } else {
                    [1.0, 0.0]
                };
                (
                    r - radius,
                    [center[0] + radius * dir[0], center[1] + radius * dir[1]],
                )
            }
            DomainKind::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let v = sub(x, center);
                let r = norm(v);
                let dir = if r > 0.0 {
                    [v[0] / r, v[1] / r]
                } else {
                    [1.0, 0.0]
                };
                let (d_out, d_in) = (r - r_out, r_in - r);
                let rad = if d_out >= d_in { r_out } else { r_in };
                (
                    d_out.max(d_in),
                    [center[0] + rad * dir[0], center[1] + rad * dir[1]],
                )
            }
            DomainKind::Ellipse { center, a, b } => ellipse_closest(sub(x, center), a, b, center),
            DomainKind::HalfGraph { graph, .. } => {
                let p = graph.closest(x);
                let d = norm(sub(x, p));
                let sign = if x[1] > graph.value(x[0]) { -1.0 } else { 1.0 };
                (sign * d, p)
            }
        }
    }

    /// Signed distance of the region actually meshed by grids: the domain
    /// itself, or the windowed chart for half graphs.
    pub fn region_distance(&self, x: Point) -> f64 {
        self.region_closest(x).0
    }

    pub(crate) fn region_closest(&self, x: Point) -> (f64, Point) {
        match self.kind {
            DomainKind::HalfGraph {
                half_width: w, top, ..
            } => {
                let (dg, pg) = self.closest_boundary_point(x);
                let side = x[0].abs() - w;
                let lid = x[1] - top;
                let (db, pb) = if side >= lid {
                    (side, [w * x[0].signum(), x[1]])
                } else {
                    (lid, [x[0], top])
                };
                if dg >= db {
                    (dg, pg)
                } else {
                    (db, pb)
                }
            }
            _ => self.closest_boundary_point(x),
        }
    }

    pub fn contains(&self, x: Point) -> bool {
        self.region_distance(x) < 0.0
    }

    /// `count` boundary samples, evenly spaced in the natural parameter.
    pub fn boundary_samples(&self, count: usize) -> Vec<BoundarySample> {
        let tau = std::f64::consts::TAU;
        match self.kind {
            DomainKind::Ball { center, radius } => (0..count)
                .map(|k| {
                    let t = tau * k as f64 / count as f64;
                    let (s, c) = t.sin_cos();
                    BoundarySample {
                        point: [center[0] + radius * c, center[1] + radius * s],
                        normal: [c, s],
                        curvature: 1.0 / radius,
                    }
                })
                .collect(),
            DomainKind::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let n_out = (count as f64 * r_out / (r_in + r_out)).round().max(1.0) as usize;
                let n_in = count.saturating_sub(n_out).max(1);
                let outer = (0..n_out).map(move |k| {
                    let (s, c) = (tau * k as f64 / n_out as f64).sin_cos();
                    BoundarySample {
                        point: [center[0] + r_out * c, center[1] + r_out * s],
                        normal: [c, s],
                        curvature: 1.0 / r_out,
                    }
                });
                let inner = (0..n_in).map(move |k| {
                    let (s, c) = (tau * k as f64 / n_in as f64).sin_cos();
                    BoundarySample {
                        point: [center[0] + r_in * c, center[1] + r_in * s],
                        normal: [-c, -s],
                        curvature: -1.0 / r_in,
                    }
                });
                outer.chain(inner).collect()
            }
            DomainKind::Ellipse { center, a, b } => (0..count)
                .map(|k| {
                    let (s, c) = (tau * k as f64 / count as f64).sin_cos();
                    let n = [b * c, a * s];
                    let nn = norm(n);
                    let q = a * a * s * s + b * b * c * c;
                    BoundarySample {
                        point: [center[0] + a * c, center[1] + b * s],
                        normal: [n[0] / nn, n[1] / nn],
                        curvature: a * b / q.powf(1.5),
                    }
                })
                .collect(),
            DomainKind::HalfGraph {
                graph, half_width, ..
            } => (0..count)
                .map(|k| {
                    let s = -half_width + 2.0 * half_width * k as f64 / (count.max(2) - 1) as f64;
                    let d = graph.slope(s);
                    let len = (1.0 + d * d).sqrt();
                    BoundarySample {
                        point: [s, graph.value(s)],
                        normal: [d / len, -1.0 / len],
                        curvature: 2.0 * graph.a / len.powi(3),
                    }
                })
                .collect(),
        }
    }

    /// Length of `∂Ω` (of the graph inside the window for half graphs).
    pub fn perimeter(&self) -> f64 {
        match self.kind {
            DomainKind::Ball { radius, .. } => std::f64::consts::TAU * radius,
            DomainKind::Annulus { r_in, r_out, .. } => std::f64::consts::TAU * (r_in + r_out),
            _ => {
                let pts = self.boundary_samples(4096);
                let mut len: f64 = pts
                    .windows(2)
                    .map(|w| norm(sub(w[1].point, w[0].point)))
                    .sum();
                if !matches!(self.kind, DomainKind::HalfGraph { .. }) {
                    len += norm(sub(pts[0].point, pts[pts.len() - 1].point));
                }
                len
            }
        }
    }

    pub fn area(&self) -> f64 {
        let pi = std::f64::consts::PI;
        match self.kind {
            DomainKind::Ball { radius, .. } => pi * radius * radius,
            DomainKind::Annulus { r_in, r_out, .. } => pi * (r_out * r_out - r_in * r_in),
            DomainKind::Ellipse { a, b, .. } => pi * a * b,
            DomainKind::HalfGraph {
                graph,
                half_width: w,
                top,
            } => 2.0 * w * top - 2.0 * graph.a * w * w * w / 3.0,
        }
    }
}

/// Closest point on an axis-aligned ellipse by the robust bisection of the
/// secular equation, working in the first quadrant with the major axis first.
fn ellipse_closest(v: Point, a: f64, b: f64, center: Point) -> (f64, Point) {
    let swap = b > a;
    let (e0, e1) = if swap { (b, a) } else { (a, b) };
    let (y0, y1) = if swap {
        (v[1].abs(), v[0].abs())
    } else {
        (v[0].abs(), v[1].abs())
    };
    let (x0, x1) = if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1) * (e0 / e1);
                let sbar = ellipse_root(r0, z0, z1, g);
                (r0 * y0 / (sbar + r0), y1 / (sbar + 1.0))
            } else {
                (y0, y1)
            }
        } else {
            (0.0, e1)
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            (e0 * xde0, e1 * (1.0 - xde0 * xde0).max(0.0).sqrt())
        } else {
            (e0, 0.0)
        }
    };
    let dist = (x0 - y0).hypot(x1 - y1);
    let inside = (y0 / e0).powi(2) + (y1 / e1).powi(2) < 1.0;
    let (px, py) = if swap { (x1, x0) } else { (x0, x1) };
    let p = [center[0] + px.copysign(v[0]), center[1] + py.copysign(v[1])];
    (if inside { -dist } else { dist }, p)
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = 0.5 * (s0 + s1);
        if s == s0 || s == s1 {
            break;
        }
        let ratio0 = n0 / (s + r0);
        let ratio1 = z1 / (s + 1.0);
        let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
        if gs > 0.0 {
            s0 = s;
        } else if gs < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Largest radius `r` such that every sampled boundary point admits an
/// interior and an exterior tangent ball of radius `r`.
pub fn ball_condition_radius(dom: &Domain, samples: usize) -> Result<f64> {
    if samples < 8 {
        return Err(Error::input(
            "ball condition needs at least 8 boundary samples",
        ));
    }
    if let DomainKind::Ball { radius, .. } = dom.kind {
        return Ok(radius);
    }
    let pts = dom.boundary_samples(samples);
    let cap = dom.diameter();
    let mut r_best = cap;
    for s in &pts {
        if s.curvature.abs() > 0.0 {
            r_best = r_best.min(1.0 / s.curvature.abs());
        }
    }
    // Shrink to the largest radius whose balls stay on their side.
    let tol = 1e-12 * cap;
    for s in &pts {
        let interior = |r: f64| {
            let c = [s.point[0] - r * s.normal[0], s.point[1] - r * s.normal[1]];
            dom.signed_distance(c) + r <= tol
        };
        let exterior = |r: f64| {
            let c = [s.point[0] + r * s.normal[0], s.point[1] + r * s.normal[1]];
            r - dom.signed_distance(c) <= tol
        };
        for ok in [&interior as &dyn Fn(f64) -> bool, &exterior] {
            if !ok(r_best) {
                let (mut lo, mut hi) = (0.0, r_best);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if ok(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                r_best = lo;
            }
        }
    }
    if !(r_best > 0.0) {
        return Err(Error::DegenerateDomain(
            "ball condition radius is zero".into(),
        ));
    }
    Ok(r_best)
}

/// Dirichlet data `g` with the Hölder exponent of its derivative.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub g: Field,
    pub beta_g: f64,
    /// Impose `g(proj x) + Dg·(x − proj x)` rather than `g(proj x)` at band nodes.
    pub linear_correction: bool,
}

impl BoundaryData {
    pub fn new(g: Field, beta_g: f64) -> Result<Self> {
        if !(beta_g > 0.0 && beta_g < 1.0) {
            return Err(Error::input(format!("β_g = {beta_g} must lie in (0, 1)")));
        }
        Ok(BoundaryData {
            g,
            beta_g,
            linear_correction: true,
        })
    }

    /// Value imposed at a node `x` with boundary projection `p`.
    pub fn band_value(&self, x: Point, p: Point, h: f64) -> f64 {
        let mut v = self.g.eval(p);
        if self.linear_correction {
            let dg = self.g.gradient(p, 1e-3 * h);
            v += dg[0] * (x[0] - p[0]) + dg[1] * (x[1] - p[1]);
        }
        v
    }

    /// `‖g‖_{C^{1,β_g}(∂Ω)}` estimated from `samples` boundary points: sup of
    /// `|g|`, of the tangential derivative, and the β_g-Hölder quotient of the
    /// tangential derivative over sample pairs.
    pub fn c1beta_norm(&self, dom: &Domain, samples: usize) -> f64 {
        let pts = dom.boundary_samples(samples.max(8));
        let step = 1e-5 * dom.diameter();
        let vals: Vec<(Point, f64, f64)> = pts
            .iter()
            .map(|s| {
                let t = [-s.normal[1], s.normal[0]];
                let dg = self.g.gradient(s.point, step);
                (s.point, self.g.eval(s.point), dg[0] * t[0] + dg[1] * t[1])
            })
            .collect();
        let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.1.abs()));
        let dsup = vals.iter().fold(0.0f64, |m, v| m.max(v.2.abs()));
        let mut holder = 0.0f64;
        for (i, a) in vals.iter().enumerate() {
            for b in &vals[i + 1..] {
                let dist = norm(sub(a.0, b.0));
                if dist > 0.0 {
                    holder = holder.max((a.2 - b.2).abs() / dist.powf(self.beta_g));
                }
            }
        }
        sup + dsup + holder
    }

    pub fn sup_norm(&self, dom: &Domain, samples: usize) -> f64 {
        dom.boundary_samples(samples.max(8))
            .iter()
            .fold(0.0f64, |m, s| m.max(self.g.eval(s.point).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Band,
    Exterior,
}

/// Uniform Cartesian grid with nodes at `(i h, j h)` covering the domain's
/// bounding box plus a margin.
#[derive(Debug, Clone)]
pub struct Grid {
    pub h: f64,
    i0: i64,
    j0: i64,
    nx: usize,
    ny: usize,
    kinds: Vec<NodeKind>,
    dense_to_active: Vec<u32>,
    active: Vec<usize>,
    interior: Vec<usize>,
    sd: Vec<f64>,
    proj: Vec<Point>,
}

/// Nodes with `d ≥ −INTERIOR_OFFSET·h` are boundary band. Keeping interior
/// nodes this far from `∂Ω` bounds cut arms from below by `0.01 h`.
pub const INTERIOR_OFFSET: f64 = 0.01;
/// Nodes with `d ≤ BAND_WIDTH·h` outside the domain are boundary band.
pub const BAND_WIDTH: f64 = 1.0;

const NONE: u32 = u32::MAX;

impl Grid {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Number of interior and band nodes.
    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    #[inline]
    pub fn dense_index(&self, ij: [i64; 2]) -> Option<usize> {
        let (di, dj) = (ij[0] - self.i0, ij[1] - self.j0);
        if di < 0 || dj < 0 || di as usize >= self.nx || dj as usize >= self.ny {
            return None;
        }
        Some(dj as usize * self.nx + di as usize)
    }

    /// Active index of the node at lattice position `ij`, if it is interior or band.
    #[inline]
    pub fn active_at(&self, ij: [i64; 2]) -> Option<usize> {
        self.dense_index(ij)
            .map(|d| self.dense_to_active[d])
            .filter(|&a| a != NONE)
            .map(|a| a as usize)
    }

    pub fn kind_at(&self, ij: [i64; 2]) -> NodeKind {
        self.dense_index(ij)
            .map_or(NodeKind::Exterior, |d| self.kinds[d])
    }

    #[inline]
    pub fn lattice(&self, active: usize) -> [i64; 2] {
        let d = self.active[active];
        [
            (d % self.nx) as i64 + self.i0,
            (d / self.nx) as i64 + self.j0,
        ]
    }

    #[inline]
    pub fn point(&self, active: usize) -> Point {
        let ij = self.lattice(active);
        [ij[0] as f64 * self.h, ij[1] as f64 * self.h]
    }

    pub fn kind(&self, active: usize) -> NodeKind {
        self.kinds[self.active[active]]
    }

    /// Active indices of interior nodes.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn is_interior(&self, active: usize) -> bool {
        self.kind(active) == NodeKind::Interior
    }

    /// Signed distance (of the meshed region) at an active node.
    pub fn distance(&self, active: usize) -> f64 {
        self.sd[active]
    }

    /// Nearest boundary point of an active node.
    pub fn projection(&self, active: usize) -> Point {
        self.proj[active]
    }

    /// Active nodes inside `Ω̄` (interior nodes and band nodes with `d ≤ 0`).
    pub fn closure_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&a| self.sd[a] <= 0.0).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(|a| self.point(a))
    }

    /// Box `[x_min, y_min, x_max, y_max]` spanned by the lattice.
    pub fn extent(&self) -> [f64; 4] {
        let h = self.h;
        [
            self.i0 as f64 * h,
            self.j0 as f64 * h,
            (self.i0 + self.nx as i64 - 1) as f64 * h,
            (self.j0 + self.ny as i64 - 1) as f64 * h,
        ]
    }
}

/// Builds a grid of spacing `h` with `margin` extra lattice layers around the
/// bounding box; nodes with `d < −0.01 h` are interior, `−0.01 h ≤ d ≤ h` band.
pub fn build_grid(dom: &Domain, h: f64, margin: usize) -> Result<Grid> {
    if !(h > 0.0) {
        return Err(Error::input(format!(
            "grid spacing h = {h} must be positive"
        )));
    }
    let r = ball_condition_radius(dom, 512)?;
    if h >= r / 4.0 {
        return Err(Error::GridTooCoarse { h, limit: r / 4.0 });
    }
    let bb = dom.bounding_box();
    let m = margin as i64 + 2;
    let i0 = (bb[0] / h).floor() as i64 - m;
    let j0 = (bb[1] / h).floor() as i64 - m;
    let i1 = (bb[2] / h).ceil() as i64 + m;
    let j1 = (bb[3] / h).ceil() as i64 + m;
    let nx = (i1 - i0 + 1) as usize;
    let ny = (j1 - j0 + 1) as usize;
    let mut kinds = vec![NodeKind::Exterior; nx * ny];
    let mut dense_to_active = vec![NONE; nx * ny];
    let mut active = Vec::new();
    let mut interior = Vec::new();
    let mut sd = Vec::new();
    let mut proj = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let x = [(i as i64 + i0) as f64 * h, (j as i64 + j0) as f64 * h];
            let (d, p) = dom.region_closest(x);
            let kind = if d < -INTERIOR_OFFSET * h {
                NodeKind::Interior
            } else if d <= BAND_WIDTH * h {
                NodeKind::Band
            } else {
                continue;
            };
            let dense = j * nx + i;
            kinds[dense] = kind;
            dense_to_active[dense] = active.len() as u32;
            if kind == NodeKind::Interior {
                interior.push(active.len());
            }
            active.push(dense);
            sd.push(d);
            proj.push(p);
        }
    }
    if interior.is_empty() {
        return Err(Error::DegenerateDomain("grid has no interior nodes".into()));
    }
    Ok(Grid {
        h,
        i0,
        j0,
        nx,
        ny,
        kinds,
        dense_to_active,
        active,
        interior,
        sd,
        proj,
    })
}

/// Values on the interior and band nodes of a grid, indexed by active index.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Grid) -> Self {
        GridFunction {
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(Point) -> f64) -> Self {
        GridFunction {
            values: grid.points().map(f).collect(),
        }
    }

    /// Sets band nodes to the boundary data.
    pub fn impose_boundary(&mut self, grid: &Grid, data: &BoundaryData) {
        for a in 0..grid.len() {
            if grid.kind(a) == NodeKind::Band {
                self.values[a] = data.band_value(grid.point(a), grid.projection(a), grid.h);
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max |self − other|` over the given nodes.
    pub fn max_diff_on(&self, other: &GridFunction, nodes: &[usize]) -> f64 {
        nodes.iter().fold(0.0f64, |m, &a| {
            m.max((self.values[a] - other.values[a]).abs())
        })
    }
}

/// First-hit distance along a ray: returns `t ∈ (0, t_max]` with
/// `x + t·dir` on the boundary of the meshed region, by sphere tracing from an
/// interior point.
pub(crate) fn ray_hit(dom: &Domain, x: Point, dir: Point, t_max: f64) -> Option<(f64, Point)> {
    let len = norm(dir);
    let mut t = 0.0;
    let stop = 1e-13 * (1.0 + len * t_max.min(1e3));
    for _ in 0..20_000 {
        let p = [x[0] + t * dir[0], x[1] + t * dir[1]];
        let (d, q) = dom.region_closest(p);
        if d >= -stop {
            return Some(polish_hit(dom, x, dir, t, q));
        }
        t += -d / len;
        if t > t_max {
            return None;
        }
    }
    // Grazing ray: it stays within rounding of the boundary.
    let p = [x[0] + t * dir[0], x[1] + t * dir[1]];
    Some((t, dom.region_closest(p).1))
}

/// Newton steps on `t ↦ d(x + t·dir)` from a sphere-tracing hit, skipped
/// for grazing rays.
fn polish_hit(dom: &Domain, x: Point, dir: Point, mut t: f64, mut q: Point) -> (f64, Point) {
    let at = |t: f64| dom.region_closest([x[0] + t * dir[0], x[1] + t * dir[1]]);
    let s = 1e-7;
    for _ in 0..3 {
        let (d, qq) = at(t);
        q = qq;
        let slope = (at(t + s).0 - at(t - s).0) / (2.0 * s);
        if !(slope > 0.05 * norm(dir)) || d == 0.0 {
            break;
        }
        t -= d / slope;
    }
    (t, q)
}

/// Area of the symmetric difference between the union of cells centred at
/// nodes with `d < 0` and the domain, estimated by `sub × sub` subsampling of
/// the cells that straddle the boundary.
pub fn classification_disagreement(dom: &Domain, grid: &Grid, sub: usize) -> f64 {
    let h = grid.h;
    let cell = h * h / (sub * sub) as f64;
    let mut area = 0.0;
    for a in 0..grid.len() {
        if grid.distance(a).abs() > h {
            continue;
        }
        let x = grid.point(a);
        let inside = grid.distance(a) < 0.0;
        for p in 0..sub {
            for q in 0..sub {
                let y = [
                    x[0] + h * ((p as f64 + 0.5) / sub as f64 - 0.5),
                    x[1] + h * ((q as f64 + 0.5) / sub as f64 - 0.5),
                ];
                if dom.contains(y) != inside {
                    area += cell;
                }
            }
        }
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn domains() -> Vec<Domain> {
        vec![
            Domain::ball([0.1, -0.2], 1.0).unwrap(),
            Domain::annulus([0.0, 0.0], 1.0, 2.0).unwrap(),
            Domain::ellipse([0.0, 0.0], 2.0, 1.0).unwrap(),
            Domain::ellipse([0.3, 0.0], 0.7, 1.3).unwrap(),
            Domain::half_graph(Graph { a: 0.5 }, 1.0, 2.0).unwrap(),
        ]
    }

    #[test]
    fn signed_distance_examples() {
        let b = Domain::ball([0.0, 0.0], 1.0).unwrap();
        assert_eq!(b.signed_distance([0.0, 0.0]), -1.0);
        assert_eq!(b.signed_distance([2.0, 0.0]), 1.0);
        let an = Domain::annulus([0.0, 0.0], 1.0, 2.0).unwrap();
        assert_eq!(an.signed_distance([1.5, 0.0]), -0.5);
        assert_eq!(an.signed_distance([0.0, 0.0]), 1.0);
    }

    #[test]
    fn ellipse_distance_matches_brute_force() {
        let e = Domain::ellipse([0.2, -0.1], 2.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0)];
            let (d, p) = e.closest_boundary_point(x);
            // Dense parametric scan refined by golden-section search.
            let f = |t: f64| {
                let q = [0.2 + 2.0 * t.cos(), -0.1 + t.sin()];
                norm(sub(q, x))
            };
            let n = 20_000;
            let k = (0..n)
                .min_by(|&a, &b| {
                    let ta = std::f64::consts::TAU * a as f64 / n as f64;
                    let tb = std::f64::consts::TAU * b as f64 / n as f64;
                    f(ta).total_cmp(&f(tb))
                })
                .unwrap();
            let dt = std::f64::consts::TAU / n as f64;
            let (mut lo, mut hi) = ((k as f64 - 1.0) * dt, (k as f64 + 1.0) * dt);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) * 0.381_966;
                let m2 = hi - (hi - lo) * 0.381_966;
                if f(m1) < f(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let best = f(0.5 * (lo + hi));
            assert!((d.abs() - best).abs() <= 1e-10, "{x:?}: {d} vs {best}");
            assert!((norm(sub(p, x)) - d.abs()).abs() <= 1e-12);
            let inside = ((x[0] - 0.2) / 2.0).powi(2) + (x[1] + 0.1).powi(2) < 1.0;
            assert_eq!(d < 0.0, inside);
        }
    }

    #[test]
    fn graph_distance_matches_brute_force() {
        let g = Graph { a: 0.7 };
        let dom = Domain::half_graph(g, 1.5, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..1.5)];
            let d = dom.signed_distance(x);
            let best = (0..200_001)
                .map(|k| {
                    let s = -4.0 + 8.0 * k as f64 / 200_000.0;
                    norm(sub([s, g.value(s)], x))
                })
                .fold(f64::INFINITY, f64::min);
            assert!(
                d.abs() <= best + 1e-12 && best - d.abs() <= 1e-6,
                "{x:?}: {d} vs {best}"
            );
            assert_eq!(d < 0.0, x[1] > g.value(x[0]));
        }
    }

    #[test]
    fn distance_is_lipschitz_and_eikonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dom in domains() {
            let bb = dom.bounding_box();
            for _ in 0..300 {
                let x = [rng.gen_range(bb[0]..bb[2]), rng.gen_range(bb[1]..bb[3])];
                let y = [
                    x[0] + rng.gen_range(-0.3..0.3),
                    x[1] + rng.gen_range(-0.3..0.3),
                ];
                let (dx, dy) = (dom.signed_distance(x), dom.signed_distance(y));
                assert!((dx - dy).abs() <= norm(sub(x, y)) * (1.0 + 1e-9) + 1e-12);
            }
            // Eikonal check near the boundary, away from the medial axis.
            for s in dom.boundary_samples(64) {
                for off in [-0.1, 0.1] {
                    let x = [
                        s.point[0] + off * s.normal[0],
                        s.point[1] + off * s.normal[1],
                    ];
                    let e = 1e-6;
                    let gx = (dom.signed_distance([x[0] + e, x[1]])
                        - dom.signed_distance([x[0] - e, x[1]]))
                        / (2.0 * e);
                    let gy = (dom.signed_distance([x[0], x[1] + e])
                        - dom.signed_distance([x[0], x[1] - e]))
                        / (2.0 * e);
                    assert!((gx.hypot(gy) - 1.0).abs() < 1e-4, "{:?} at {x:?}", dom.kind);
                }
            }
        }
    }

    #[test]
    fn ball_condition_examples() {
        let b = Domain::ball([0.0, 0.0], 1.0).unwrap();
        assert!((ball_condition_radius(&b, 64).unwrap() - 1.0).abs() <= 1e-8);
        let b3 = Domain::ball([1.0, 2.0], 0.3).unwrap();
        assert!((ball_condition_radius(&b3, 64).unwrap() - 0.3).abs() <= 1e-8);
        let an = Domain::annulus([0.0, 0.0], 1.0, 2.0).unwrap();
        assert!((ball_condition_radius(&an, 256).unwrap() - 0.5).abs() <= 1e-8);
        let el = Domain::ellipse([0.0, 0.0], 2.0, 1.0).unwrap();
        assert!((ball_condition_radius(&el, 256).unwrap() - 0.5).abs() <= 1e-8);
        assert!(ball_condition_radius(&el, 4).is_err());
    }

    #[test]
    fn grid_counts_and_classes() {
        let b = Domain::ball([0.0, 0.0], 1.0).unwrap();
        let g = build_grid(&b, 0.1, 3).unwrap();
        let n = g.interior().len() as f64;
        let expect = std::f64::consts::PI / 0.01;
        assert!((n - expect).abs() <= 0.05 * expect, "{n}");
        let origin = g.active_at([0, 0]).unwrap();
        assert!(g.is_interior(origin));
        assert_eq!(g.point(origin), [0.0, 0.0]);
        assert_eq!(g.kind_at([1000, 0]), NodeKind::Exterior);
        for a in 0..g.len() {
            let d = g.distance(a);
            match g.kind(a) {
                NodeKind::Interior => assert!(d < 0.0),
                NodeKind::Band => assert!(d.abs() <= g.h),
                NodeKind::Exterior => unreachable!(),
            }
        }
        assert!(matches!(
            build_grid(&b, 0.3, 3),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn refinement_shrinks_disagreement() {
        let dom = Domain::ellipse([0.0, 0.0], 1.0, 0.7).unwrap();
        let coarse =
            classification_disagreement(&dom, &build_grid(&dom, 1.0 / 16.0, 1).unwrap(), 8);
        let fine = classification_disagreement(&dom, &build_grid(&dom, 1.0 / 32.0, 1).unwrap(), 8);
        assert!(fine < 0.65 * coarse, "{coarse} -> {fine}");
    }

    #[test]
    fn ray_hits_boundary() {
        let b = Domain::ball([0.0, 0.0], 1.0).unwrap();
        let (t, p) = ray_hit(&b, [0.5, 0.0], [1.0, 0.0], 2.0).unwrap();
        assert!((t - 0.5).abs() < 1e-12 && (p[0] - 1.0).abs() < 1e-12);
        assert!(ray_hit(&b, [0.0, 0.0], [0.1, 0.0], 1.0).is_none());
        let an = Domain::annulus([0.0, 0.0], 1.0, 2.0).unwrap();
        let (t, _) = ray_hit(&an, [1.5, 0.0], [-1.0, 0.0], 1.0).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn boundary_data_norms() {
        let b = Domain::ball([0.0, 0.0], 1.0).unwrap();
        let data = BoundaryData::new(Field::constant(2.0), 0.5).unwrap();
        assert!((data.c1beta_norm(&b, 64) - 2.0).abs() < 1e-9);
        let lin = BoundaryData::new(Field::from_fn(|x| x[0]), 0.5).unwrap();
        // sup |x1| = 1, tangential derivative sin-like with sup 1, plus a finite Hölder term
        assert!(lin.c1beta_norm(&b, 128) > 2.0);
        assert!(BoundaryData::new(Field::constant(0.0), 1.0).is_err());
        assert!((lin.band_value([1.1, 0.0], [1.0, 0.0], 0.1) - 1.1).abs() < 1e-9);
    }
}
