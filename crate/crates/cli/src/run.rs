//! Executes the experiments of a config and collects metrics and checks.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pucci_core::analysis::{
    abp_verify, affine_fit_sequence, alpha_admissible, barrier_distance_check, comparison_verify,
    smallness_constants, smallness_rescale, ComparisonMode, Region,
};
use pucci_core::degeneracy::check_a2;
use pucci_core::geometry::{ball_condition_radius, build_grid, BoundaryData, GridFunction};
use pucci_core::operators::check_uniform_ellipticity;
use pucci_core::scheme::{monotonicity_check, Discretization, Problem, SchemeParams, Stencil};
use pucci_core::solver::{solve_dirichlet, SolveConfig, Solution};
use pucci_core::{Error, Field, Point};

use crate::config::{Experiment, ExperimentConfig, ParseError};

/// Why a run stopped before producing a verdict.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {error}")]
    Parse { path: String, error: ParseError },
    #[error("{0}")]
    Core(#[from] Error),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl RunError {
    /// Process exit code: 3 for non-convergence, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(Error::NoConvergence { .. }) => 3,
            _ => 2,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> RunError {
    let context = context.into();
    move |source| RunError::Io { context, source }
}

/// A named scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub experiment: &'static str,
    /// Refinement level, or `None` for level-independent values.
    pub level: Option<usize>,
    pub h: Option<f64>,
    pub name: String,
    pub value: f64,
}

/// A pass/fail verification.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub experiment: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: 20240917 }
    }
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub name: String,
    pub metrics: Vec<Metric>,
    pub checks: Vec<Check>,
    /// `(x, y, u)` at the nodes of `Ω̄` on the finest level.
    pub solution: Vec<(f64, f64, f64)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    /// The first metric with this name (and level, if given).
    pub fn metric(&self, experiment: &str, name: &str, level: Option<usize>) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.experiment == experiment && m.name == name && (level.is_none() || m.level == level))
            .map(|m| m.value)
    }

    pub fn check(&self, experiment: &str, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.experiment == experiment && c.name == name)
    }

    pub fn solution_csv(&self) -> String {
        let mut s = String::from("x,y,u\n");
        for (x, y, u) in &self.solution {
            let _ = writeln!(s, "{x},{y},{u}");
        }
        s
    }

    pub fn report_csv(&self) -> String {
        let mut s = String::from("experiment,level,h,metric,value\n");
        for m in &self.metrics {
            let level = m.level.map_or_else(String::new, |l| l.to_string());
            let h = m.h.map_or_else(String::new, |h| h.to_string());
            let _ = writeln!(s, "{},{level},{h},{},{}", m.experiment, m.name, m.value);
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = format!("{}\n", self.name);
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{verdict} {}/{}: {}", c.experiment, c.name, c.detail);
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(
            s,
            "{}: {} checks, {failed} failed",
            if failed == 0 { "PASS" } else { "FAIL" },
            self.checks.len()
        );
        s
    }

    /// Writes `solution.csv`, `report.csv` and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), RunError> {
        fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
        for (file, body) in [
            ("solution.csv", self.solution_csv()),
            ("report.csv", self.report_csv()),
            ("summary.txt", self.summary()),
        ] {
            let path = dir.join(file);
            fs::write(&path, body).map_err(io_err(format!("writing {}", path.display())))?;
        }
        Ok(())
    }
}

/// Reads and parses a config file.
pub fn load(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(path).map_err(io_err(format!("reading {}", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
    ExperimentConfig::parse(&text, stem).map_err(|error| RunError::Parse {
        path: path.display().to_string(),
        error,
    })
}

/// Output directory: the explicit one, else the config's, else `out/<name>`.
pub fn output_dir(cfg: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name))
}

pub fn problem(cfg: &ExperimentConfig) -> Result<Problem, Error> {
    let p = &cfg.problem;
    Ok(Problem {
        domain: p.domain.clone(),
        operator: p.operator.clone(),
        law: p.law.clone(),
        f: p.f.clone().into_field(),
        boundary: BoundaryData::new(p.g.clone().into_field(), p.beta_g)?,
    })
}

/// Solves the problem on every refinement level.
pub fn solve_levels(cfg: &ExperimentConfig) -> Result<Vec<Solution>, Error> {
    let stencil = Stencil::lattice(cfg.grid.stencil)?;
    let problem = problem(cfg)?;
    cfg.grid
        .spacings()
        .into_iter()
        .map(|h| solve_dirichlet(Discretization::new(problem.clone(), h, stencil.clone())?, &cfg.solve_config(h)))
        .collect()
}

struct Recorder {
    metrics: Vec<Metric>,
    checks: Vec<Check>,
}

impl Recorder {
    fn metric(&mut self, experiment: Experiment, level: Option<(usize, f64)>, name: &str, value: f64) {
        self.metrics.push(Metric {
            experiment: experiment.name(),
            level: level.map(|l| l.0),
            h: level.map(|l| l.1),
            name: name.to_string(),
            value,
        });
    }

    fn check(&mut self, experiment: Experiment, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            experiment: experiment.name(),
            name: name.to_string(),
            passed,
            detail,
        });
    }
}

/// Least-squares slope of `log e` against `log h`.
pub fn empirical_order(hs: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e > 0.0)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// `max (c) − min (c)` relative to `max (c)`.
pub fn relative_variation(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    if hi > 0.0 {
        (hi - lo) / hi
    } else {
        0.0
    }
}

/// The point used for local (smallness, fit) experiments when none is given:
/// the closure node nearest to the center of the bounding box.
fn default_center(sol: &Solution) -> Point {
    let [x0, y0, x1, y1] = sol.disc.problem.domain.bounding_box();
    let c = [0.5 * (x0 + x1), 0.5 * (y0 + y1)];
    let grid = &sol.disc.grid;
    grid.closure_nodes()
        .into_iter()
        .map(|a| grid.point(a))
        .min_by(|p, q| {
            let dp = (p[0] - c[0]).hypot(p[1] - c[1]);
            let dq = (q[0] - c[0]).hypot(q[1] - c[1]);
            dp.total_cmp(&dq)
        })
        .unwrap_or(c)
}

/// Runs the configured experiments in order.
pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Outcome, RunError> {
    let mut rec = Recorder {
        metrics: Vec::new(),
        checks: Vec::new(),
    };
    let needs_solutions = cfg
        .experiments
        .iter()
        .any(|e| !matches!(e, Experiment::Comparison | Experiment::Assumptions));
    let solutions = if needs_solutions { solve_levels(cfg)? } else { Vec::new() };
    let hs = cfg.grid.spacings();

    for &exp in &cfg.experiments {
        match exp {
            Experiment::Solve => solve_metrics(cfg, &solutions, &hs, &mut rec)?,
            Experiment::Abp => abp(cfg, &solutions, &mut rec),
            Experiment::Barrier => barrier(cfg, &solutions, &mut rec),
            Experiment::Comparison => comparison(cfg, opts.seed, &mut rec)?,
            Experiment::Regularity => regularity(cfg, &solutions, &mut rec)?,
            Experiment::Assumptions => assumptions(cfg, opts.seed, &mut rec)?,
        }
    }

    let solution = match solutions.last() {
        Some(sol) => {
            let grid = &sol.disc.grid;
            grid.closure_nodes()
                .into_iter()
                .map(|a| {
                    let x = grid.point(a);
                    (x[0], x[1], sol.u.values[a])
                })
                .collect()
        }
        None => Vec::new(),
    };
    Ok(Outcome {
        name: cfg.name.clone(),
        metrics: rec.metrics,
        checks: rec.checks,
        solution,
    })
}

fn solve_metrics(
    cfg: &ExperimentConfig,
    solutions: &[Solution],
    hs: &[f64],
    rec: &mut Recorder,
) -> Result<(), Error> {
    let e = Experiment::Solve;
    let v = &cfg.verify;
    let mut errors = Vec::new();
    for (level, sol) in solutions.iter().enumerate() {
        let at = Some((level, hs[level]));
        let report = &sol.report;
        rec.metric(e, at, "nodes", sol.disc.interior_len() as f64);
        rec.metric(e, at, "sweeps", report.stages.iter().map(|s| s.iterations).sum::<usize>() as f64);
        for (k, st) in report.stages.iter().enumerate() {
            rec.metric(e, at, &format!("stage{k}_epsilon"), st.epsilon);
            rec.metric(e, at, &format!("stage{k}_sweeps"), st.iterations as f64);
            rec.metric(e, at, &format!("stage{k}_omega"), st.omega);
        }
        rec.metric(e, at, "residual", report.stages.last().map_or(0.0, |s| s.residual));
        rec.metric(e, at, "residual_eta_tenth", report.residual_eta_tenth);
        rec.metric(e, at, "lipschitz", report.lipschitz);
        rec.metric(e, at, "holder_half", report.holder_half);
        rec.metric(e, at, "sup_u", sol.u.sup_norm());
        if let Some(exact) = &cfg.problem.exact {
            let grid = &sol.disc.grid;
            let err = grid
                .interior()
                .iter()
                .map(|&a| (sol.u.values[a] - exact.eval(grid.point(a))).abs())
                .fold(0.0, f64::max);
            rec.metric(e, at, "error_linf", err);
            errors.push(err);
            if let Some(c) = v.error_factor {
                rec.check(
                    e,
                    &format!("error_le_{c}h_level{level}"),
                    err <= c * hs[level],
                    format!("error {err:.3e} vs {c}·h = {:.3e}", c * hs[level]),
                );
            }
            if let Some(m) = v.error_max {
                rec.check(
                    e,
                    &format!("error_max_level{level}"),
                    err <= m,
                    format!("error {err:.3e} vs {m:.3e}"),
                );
            }
        }
        // The smallness regime is reported for every solve.
        let center = v.smallness_center.unwrap_or_else(|| default_center(sol));
        let p = &sol.disc.problem;
        let small = smallness_rescale(&sol.u, &sol.disc.grid, &p.f, &p.boundary, &p.law, &p.domain, v.eps0, center)?;
        rec.metric(e, at, "smallness_k", small.k);
        rec.metric(e, at, "smallness_r", small.r);
        rec.metric(e, at, "smallness_u_sup", small.u_sup);
        rec.metric(e, at, "smallness_f_sup", small.f_sup);
        rec.metric(e, at, "smallness_g_norm", small.g_norm);
        rec.check(
            e,
            &format!("smallness_level{level}"),
            small.passed,
            format!(
                "K = {:.4}, r = {:.4}: sup|ū| = {:.4} ≤ 1, ‖ḡ‖ = {:.4} ≤ 1, sup|f̄| = {:.3e} ≤ ε₀ = {}",
                small.k, small.r, small.u_sup, small.g_norm, small.f_sup, v.eps0
            ),
        );
    }
    if errors.len() >= 2 {
        if let Some(order) = empirical_order(&hs[..errors.len()], &errors) {
            rec.metric(e, None, "order", order);
            if let Some(min) = v.order_min {
                rec.check(e, "order", order >= min, format!("empirical order {order:.3} vs {min}"));
            }
        }
    }
    Ok(())
}

fn abp(cfg: &ExperimentConfig, solutions: &[Solution], rec: &mut Recorder) {
    let e = Experiment::Abp;
    let mut constants = Vec::new();
    for (level, sol) in solutions.iter().enumerate() {
        let at = Some((level, sol.disc.h()));
        let p = &sol.disc.problem;
        let k = cfg.verify.abp_offset;
        let r = if k == 0.0 {
            abp_verify(&sol.u, &sol.disc.grid, &p.boundary, &p.f, &p.law, &p.domain)
        } else {
            // The operator sees only Du and D²u, so u − k solves the same
            // equation with data g − k.
            let shifted = GridFunction {
                values: sol.u.values.iter().map(|u| u - k).collect(),
            };
            let bd = BoundaryData::new(p.boundary.g.shifted(-k), p.boundary.beta_g)
                .expect("shifting keeps the boundary exponent valid");
            abp_verify(&shifted, &sol.disc.grid, &bd, &p.f, &p.law, &p.domain)
        };
        rec.metric(e, at, "constant", r.constant);
        rec.metric(e, at, "sup_u", r.lhs);
        rec.metric(e, at, "bound", r.rhs);
        rec.metric(e, at, "f_norm", r.f_norm);
        rec.metric(e, at, "contact_upper", r.upper.contact_nodes as f64);
        rec.metric(e, at, "contact_lower", r.lower.contact_nodes as f64);
        rec.check(
            e,
            &format!("bound_level{level}"),
            r.lhs <= r.rhs * (1.0 + 1e-12) + 1e-14,
            format!("sup|u| = {:.6} ≤ {:.6}", r.lhs, r.rhs),
        );
        constants.push(r.constant);
    }
    if constants.len() >= 2 {
        let var = relative_variation(&constants);
        rec.metric(e, None, "constant_variation", var);
        if let Some(tol) = cfg.verify.abp_variation {
            rec.check(
                e,
                "constant_variation",
                var <= tol,
                format!("c = {constants:.5?}, variation {:.1}% vs {:.0}%", 100.0 * var, 100.0 * tol),
            );
        }
    }
}

fn barrier(cfg: &ExperimentConfig, solutions: &[Solution], rec: &mut Recorder) {
    let e = Experiment::Barrier;
    let v = &cfg.verify;
    for (level, sol) in solutions.iter().enumerate() {
        let at = Some((level, sol.disc.h()));
        let grid = &sol.disc.grid;
        if let (Some(lo), Some(hi)) = (&sol.lower, &sol.upper) {
            let (mut violations, mut worst) = (0usize, 0.0f64);
            for &a in grid.interior() {
                let u = sol.u.values[a];
                let excess = (lo.values.values[a] - u).max(u - hi.values.values[a]);
                worst = worst.max(excess);
                if excess > v.sandwich_tol {
                    violations += 1;
                }
            }
            rec.metric(e, at, "barrier_k", hi.k);
            rec.metric(e, at, "sandwich_violations", violations as f64);
            rec.check(
                e,
                &format!("sandwich_level{level}"),
                violations == 0,
                format!("{violations} nodes outside the barriers by more than {:e} (worst {worst:.3e})", v.sandwich_tol),
            );
        } else {
            rec.metric(e, at, "sandwich_violations", f64::NAN);
        }

        // The distance bound is stated for the normalized problem ū = u/K, ḡ = g/K.
        let p = &sol.disc.problem;
        let closure = grid.closure_nodes();
        let u_sup = closure.iter().fold(0.0f64, |m, &a| m.max(sol.u.values[a].abs()));
        let f_sup = grid.interior().iter().fold(0.0f64, |m, &a| m.max(p.f.eval(grid.point(a)).abs()));
        let g_norm = p.boundary.c1beta_norm(&p.domain, 1024);
        let (k, _) = smallness_constants(u_sup, g_norm, f_sup, &p.law, v.eps0);
        let scaled = GridFunction {
            values: sol.u.values.iter().map(|u| u / k).collect(),
        };
        let g = p.boundary.g.clone();
        let Ok(bd) = BoundaryData::new(Field::from_fn(move |x| g.eval(x) / k), p.boundary.beta_g) else {
            continue;
        };
        let d = barrier_distance_check(&scaled, grid, &bd, v.barrier_delta, v.barrier_gamma, Region::Whole);
        rec.metric(e, at, "distance_max_violation", d.max_violation);
        rec.check(
            e,
            &format!("distance_level{level}"),
            d.passed,
            format!(
                "|ū − ḡ(π y)| ≤ (6/δ)·d/(1+d^γ) at {} nodes (K = {k:.4}, worst margin {:.3e})",
                d.checked, d.max_violation
            ),
        );
    }
}

/// `v` solves the problem with forcing raised and boundary data lowered, `w`
/// with forcing lowered and data raised, so `v` is a subsolution and `w` a
/// supersolution of the original scheme.
fn comparison(cfg: &ExperimentConfig, seed: u64, rec: &mut Recorder) -> Result<(), Error> {
    let e = Experiment::Comparison;
    let v = &cfg.verify;
    let base = problem(cfg)?;
    let stencil = Stencil::lattice(cfg.grid.stencil)?;
    let h = v.comparison_h;
    build_grid(&base.domain, h, 1)?;
    let full = cfg.solve_config(h);
    let solve_cfg = SolveConfig {
        epsilons: full.epsilons.iter().copied().take(3).collect(),
        ..full
    };
    let eps = *solve_cfg.epsilons.last().unwrap();
    let eta = solve_cfg.eta_factors[(solve_cfg.epsilons.len() - 1).min(solve_cfg.eta_factors.len() - 1)] * h;
    let params = SchemeParams::new(eta, eps)?;
    let disc = Discretization::new(base.clone(), h, stencil.clone())?;
    let [bx0, by0, bx1, by1] = base.domain.bounding_box();
    let mid = [0.5 * (bx0 + bx1), 0.5 * (by0 + by1)];

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
    let (mut failures, mut worst) = (0usize, f64::NEG_INFINITY);
    for _ in 0..v.comparison_pairs {
        let mut perturbed = |raise: f64| -> Result<Problem, Error> {
            let (a, b, c) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..0.5));
            let f = base.f.clone();
            let g = base.boundary.g.clone();
            Ok(Problem {
                f: Field::from_fn(move |x| f.eval(x) + raise * (a + b * ((x[0] - mid[0]).powi(2) + (x[1] - mid[1]).powi(2)))),
                boundary: BoundaryData::new(Field::from_fn(move |x| g.eval(x) - raise * c), base.boundary.beta_g)?,
                ..base.clone()
            })
        };
        let (pv, pw) = (perturbed(1.0)?, perturbed(-1.0)?);
        let sv = solve_dirichlet(Discretization::new(pv, h, stencil.clone())?, &solve_cfg)?;
        let sw = solve_dirichlet(Discretization::new(pw, h, stencil.clone())?, &solve_cfg)?;
        let f_scale = [&sv, &sw]
            .iter()
            .flat_map(|s| (0..s.disc.interior_len()).map(|k| s.disc.forcing(k).abs()))
            .fold(1.0f64, f64::max);
        let slack = 2.0 * solve_cfg.tolerance * f_scale;
        let r = comparison_verify(&sv.u, &sw.u, &disc, &params, ComparisonMode::EpsilonProper { slack });
        worst = worst.max(r.max_excess);
        if !r.passed {
            failures += 1;
        }
    }
    rec.metric(e, None, "pairs", v.comparison_pairs as f64);
    rec.metric(e, None, "failures", failures as f64);
    rec.metric(e, None, "max_excess", worst);
    rec.check(
        e,
        "pairs",
        failures == 0,
        format!(
            "{failures} of {} sub/super pairs violate v ≤ w (h = {h}, ε = {eps:e}, worst max(v − w) = {worst:.3e})",
            v.comparison_pairs
        ),
    );
    Ok(())
}

fn regularity(cfg: &ExperimentConfig, solutions: &[Solution], rec: &mut Recorder) -> Result<(), Error> {
    let e = Experiment::Regularity;
    let v = &cfg.verify;
    let target = alpha_admissible(&cfg.problem.law, cfg.problem.beta_g, v.alpha_bar)?;
    rec.metric(e, None, "alpha_admissible", target.alpha_max);
    rec.metric(e, None, "alpha_bar", target.alpha_bar);
    let Some(sol) = solutions.last() else {
        return Ok(());
    };
    let center = v.fit_center.unwrap_or_else(|| default_center(sol));
    let grid = &sol.disc.grid;
    let at = Some((solutions.len() - 1, sol.disc.h()));
    let fit = affine_fit_sequence(&sol.u, grid, center, v.fit_rho, v.fit_kmax, 1.0)?;
    rec.metric(e, at, "alpha_fit", fit.alpha_fit);
    rec.metric(e, at, "c0_fit", fit.c0_fit);
    for (k, err) in fit.errors.iter().enumerate() {
        rec.metric(e, at, &format!("fit_error_k{}", k + 1), *err);
    }
    if let Some(exact) = &cfg.problem.exact {
        let ex = GridFunction::from_fn(grid, |x| exact.eval(x));
        let fit_exact = affine_fit_sequence(&ex, grid, center, v.fit_rho, v.fit_kmax, 1.0)?;
        rec.metric(e, at, "alpha_fit_exact", fit_exact.alpha_fit);
    }
    if v.alpha_min.is_some() || v.alpha_max.is_some() {
        let lo = v.alpha_min.unwrap_or(f64::NEG_INFINITY);
        let hi = v.alpha_max.unwrap_or(f64::INFINITY);
        rec.check(
            e,
            "alpha_fit_range",
            (lo..=hi).contains(&fit.alpha_fit),
            format!("α_fit = {:.4} in [{lo}, {hi}] (errors {:.3?})", fit.alpha_fit, fit.errors),
        );
    }
    if let Some(tol) = v.alpha_sharp_tol {
        let gap = (fit.alpha_fit - target.alpha_max).abs();
        rec.check(
            e,
            "alpha_sharp",
            gap <= tol,
            format!("|α_fit − α_admissible| = |{:.4} − {:.4}| = {gap:.4} ≤ {tol}", fit.alpha_fit, target.alpha_max),
        );
    }
    Ok(())
}

fn assumptions(cfg: &ExperimentConfig, seed: u64, rec: &mut Recorder) -> Result<(), Error> {
    let e = Experiment::Assumptions;
    let p = &cfg.problem;
    let v = &cfg.verify;
    let grid = build_grid(&p.domain, cfg.grid.h, 1)?;
    let closure = grid.closure_nodes();
    let stride = closure.len().div_ceil(512).max(1);
    let xs: Vec<Point> = closure.into_iter().step_by(stride).map(|a| grid.point(a)).collect();
    let a2 = check_a2(&p.law, &xs, 64, seed)?;
    rec.metric(e, None, "a2_checks", a2.checks as f64);
    rec.check(
        e,
        "a2",
        a2.passed(),
        format!(
            "{} checks: {} almost-monotonicity and {} normalization violations",
            a2.checks, a2.monotonicity_violations, a2.normalization_violations
        ),
    );
    let ell = check_uniform_ellipticity(&p.operator, 2, 10_000, seed)?;
    rec.check(
        e,
        "uniform_ellipticity",
        ell.violations == 0,
        format!("{} of {} samples violate (λ, Λ) bounds", ell.violations, ell.samples),
    );
    let params = SchemeParams::new(1e-6 * cfg.grid.h, *cfg.solve.epsilons.last().unwrap())?;
    let mono = monotonicity_check(&p.law, &p.operator, &params, v.monotonicity_trials, seed)?;
    rec.metric(e, None, "monotonicity_trials", mono.trials as f64);
    rec.check(
        e,
        "monotonicity",
        mono.violations == 0,
        format!("{} violations in {} trials (worst {:.3e})", mono.violations, mono.trials, mono.worst),
    );
    let r0 = ball_condition_radius(&p.domain, 2048)?;
    rec.metric(e, None, "ball_radius", r0);
    rec.check(e, "ball_condition", r0 > 0.0, format!("uniform ball radius {r0:.4}"));
    let bd = BoundaryData::new(p.g.clone().into_field(), p.beta_g)?;
    rec.metric(e, None, "beta_g", p.beta_g);
    rec.metric(e, None, "g_c1beta", bd.c1beta_norm(&p.domain, 1024));
    rec.metric(e, None, "i_phi", p.law.i_phi);
    rec.metric(e, None, "s_phi", p.law.s_phi);
    Ok(())
}
