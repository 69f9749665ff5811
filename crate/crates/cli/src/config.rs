//! Experiment configuration files.
//!
//! A config is a sequence of `[section]` headers and `key = value` lines;
//! `#` starts a comment. Numbers may be written as constant expressions
//! (`1/16`, `(4/3)^4`), fields `f`, `g` and `exact` as expressions over
//! `x1`, `x2`. See the README for the full grammar.

use std::fmt;
use std::path::PathBuf;

use pucci_core::degeneracy::DegeneracyLaw;
use pucci_core::expr::Expr;
use pucci_core::geometry::{Domain, Graph};
use pucci_core::operators::{EllipticityPair, OperatorSpec, SymMatrix};
use pucci_core::solver::{Relaxation, SolveConfig, Start};
use pucci_core::{Error, Point};

/// A parse or validation error pinned to a place in the config text.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Solve,
    Abp,
    Barrier,
    Comparison,
    Regularity,
    Assumptions,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Solve,
        Experiment::Abp,
        Experiment::Barrier,
        Experiment::Comparison,
        Experiment::Regularity,
        Experiment::Assumptions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::Abp => "abp",
            Experiment::Barrier => "barrier",
            Experiment::Comparison => "comparison",
            Experiment::Regularity => "regularity",
            Experiment::Assumptions => "assumptions",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub domain: Domain,
    pub operator: OperatorSpec,
    pub law: DegeneracyLaw,
    pub f: Expr,
    pub g: Expr,
    pub beta_g: f64,
    pub exact: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Spacing of the coarsest level.
    pub h: f64,
    /// Number of levels; level `k` uses `h / 2^k`.
    pub levels: usize,
    pub stencil: usize,
}

impl GridConfig {
    pub fn spacings(&self) -> Vec<f64> {
        (0..self.levels).map(|k| self.h / 2f64.powi(k as i32)).collect()
    }
}

/// Tolerances of the verifications; `None` disables a check.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub error_factor: Option<f64>,
    pub error_max: Option<f64>,
    pub order_min: Option<f64>,
    pub sandwich_tol: f64,
    pub abp_variation: Option<f64>,
    /// ABP is fitted on `u − abp_offset` with data `g − abp_offset`.
    pub abp_offset: f64,
    pub barrier_delta: f64,
    pub barrier_gamma: f64,
    pub comparison_pairs: usize,
    pub comparison_h: f64,
    pub fit_center: Option<Point>,
    pub fit_rho: f64,
    pub fit_kmax: u32,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub alpha_sharp_tol: Option<f64>,
    pub alpha_bar: Option<f64>,
    pub eps0: f64,
    pub smallness_center: Option<Point>,
    pub monotonicity_trials: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            error_factor: None,
            error_max: None,
            order_min: None,
            sandwich_tol: 1e-8,
            abp_variation: None,
            abp_offset: 0.0,
            barrier_delta: 0.25,
            barrier_gamma: 0.5,
            comparison_pairs: 20,
            comparison_h: 0.125,
            fit_center: None,
            fit_rho: 0.5,
            fit_kmax: 3,
            alpha_min: None,
            alpha_max: None,
            alpha_sharp_tol: None,
            alpha_bar: None,
            eps0: 0.5,
            smallness_center: None,
            monotonicity_trials: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub description: String,
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    pub solve: SolveConfig,
    /// Per-level ε schedule ending at `h²` instead of the fixed one.
    pub epsilon_coupling: EpsilonCoupling,
    pub experiments: Vec<Experiment>,
    pub verify: VerifyConfig,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonCoupling {
    /// Every level uses `[solve] epsilons`.
    Fixed,
    /// Each level runs decades from the first ε down to `h²`.
    H2,
}

impl ExperimentConfig {
    /// The solver settings for spacing `h`.
    pub fn solve_config(&self, h: f64) -> SolveConfig {
        match self.epsilon_coupling {
            EpsilonCoupling::Fixed => self.solve.clone(),
            EpsilonCoupling::H2 => {
                let last = h * h;
                let mut eps = Vec::new();
                let mut e = self.solve.epsilons[0];
                while e > 2.0 * last {
                    eps.push(e);
                    e *= 0.1;
                }
                eps.push(last);
                SolveConfig {
                    epsilons: eps,
                    ..self.solve.clone()
                }
            }
        }
    }
}

/// Where a value sits in the text, for error reporting.
#[derive(Debug, Clone, Copy)]
struct Span {
    line: usize,
    column: usize,
}

impl Span {
    fn error(self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn shifted(self, by: usize) -> Span {
        Span {
            line: self.line,
            column: self.column + by,
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    key_span: Span,
    value_span: Span,
}

const SECTIONS: [&str; 6] = ["problem", "grid", "solve", "experiments", "verify", "output"];

/// Splits the text into `(section, entries)` groups.
fn lex(text: &str) -> Result<Vec<(String, Span, Vec<Entry>)>, ParseError> {
    let mut sections: Vec<(String, Span, Vec<Entry>)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let trimmed = body.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = body.len() - body.trim_start().len();
        let span = Span { line, column: indent + 1 };
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| span.error("section header is missing `]`"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(span.error(format!(
                    "unknown section `[{name}]`; expected one of {}",
                    SECTIONS.join(", ")
                )));
            }
            if sections.iter().any(|s| s.0 == name) {
                return Err(span.error(format!("section `[{name}]` appears twice")));
            }
            sections.push((name.to_string(), span, Vec::new()));
            continue;
        }
        let eq = body
            .find('=')
            .ok_or_else(|| span.error("expected `key = value` or a `[section]` header"))?;
        let key = body[..eq].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(span.error(format!("invalid key `{key}`")));
        }
        let value_raw = &body[eq + 1..];
        let value = value_raw.trim();
        let value_col = eq + 2 + (value_raw.len() - value_raw.trim_start().len());
        if value.is_empty() {
            return Err(Span { line, column: value_col }.error(format!("`{key}` has no value")));
        }
        let Some(current) = sections.last_mut() else {
            return Err(span.error("entry before any `[section]` header"));
        };
        if current.2.iter().any(|e| e.key == key) {
            return Err(span.error(format!("`{key}` is set twice in `[{}]`", current.0)));
        }
        current.2.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            key_span: span,
            value_span: Span { line, column: value_col },
        });
    }
    Ok(sections)
}

fn expr(e: &Entry) -> Result<Expr, ParseError> {
    expr_at(&e.value, e.value_span)
}

fn expr_at(src: &str, span: Span) -> Result<Expr, ParseError> {
    Expr::parse(src).map_err(|err| match err {
        Error::Expr { column, message } => span.shifted(column - 1).error(message),
        other => span.error(other.to_string()),
    })
}

fn number_at(src: &str, span: Span) -> Result<f64, ParseError> {
    let e = expr_at(src, span)?;
    let v = e
        .constant_value()
        .ok_or_else(|| span.error(format!("`{src}` must be a constant")))?;
    if !v.is_finite() {
        return Err(span.error(format!("`{src}` is not a finite number")));
    }
    Ok(v)
}

fn number(e: &Entry) -> Result<f64, ParseError> {
    number_at(&e.value, e.value_span)
}

fn positive(e: &Entry) -> Result<f64, ParseError> {
    let v = number(e)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(e.value_span.error(format!("`{}` must be positive", e.key)))
    }
}

fn integer(e: &Entry) -> Result<usize, ParseError> {
    e.value
        .parse::<usize>()
        .map_err(|_| e.value_span.error(format!("`{}` must be a non-negative integer", e.key)))
}

fn boolean(e: &Entry) -> Result<bool, ParseError> {
    match e.value.as_str() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(e.value_span.error(format!("`{}` must be true or false", e.key))),
    }
}

/// Splits `a, b, c` at top-level commas, keeping each piece's column offset.
fn split_list(src: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, c) in src.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push((start, &src[start..i]));
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push((start, &src[start..]));
    out.into_iter()
        .map(|(off, s)| (off + (s.len() - s.trim_start().len()), s.trim()))
        .collect()
}

/// A call `name(arg, …)` with argument offsets relative to the value start.
struct Call<'a> {
    name: &'a str,
    args: Vec<(usize, &'a str)>,
    span: Span,
}

impl<'a> Call<'a> {
    fn parse(e: &'a Entry) -> Result<Call<'a>, ParseError> {
        let v = e.value.as_str();
        match v.find('(') {
            None => Ok(Call {
                name: v,
                args: Vec::new(),
                span: e.value_span,
            }),
            Some(open) => {
                let inner = v[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| e.value_span.shifted(v.len()).error("expected `)` at the end"))?;
                let args = split_list(inner)
                    .into_iter()
                    .map(|(off, s)| (off + open + 1, s))
                    .collect();
                Ok(Call {
                    name: v[..open].trim(),
                    args,
                    span: e.value_span,
                })
            }
        }
    }

    fn arity(&self, n: usize, usage: &str) -> Result<(), ParseError> {
        if self.args.len() == n && self.args.iter().all(|a| !a.1.is_empty()) || n == 0 && self.args.is_empty() {
            Ok(())
        } else {
            Err(self.span.error(format!("expected {usage}")))
        }
    }

    fn num(&self, k: usize) -> Result<f64, ParseError> {
        let (off, s) = self.args[k];
        number_at(s, self.span.shifted(off))
    }

    fn expr(&self, k: usize) -> Result<Expr, ParseError> {
        let (off, s) = self.args[k];
        expr_at(s, self.span.shifted(off))
    }
}

fn core_error(span: Span, err: Error) -> ParseError {
    span.error(err.to_string())
}

fn parse_domain(e: &Entry) -> Result<Domain, ParseError> {
    let c = Call::parse(e)?;
    let dom = match c.name {
        "ball" => {
            c.arity(3, "ball(cx, cy, r)")?;
            Domain::ball([c.num(0)?, c.num(1)?], c.num(2)?)
        }
        "annulus" => {
            c.arity(4, "annulus(cx, cy, r_in, r_out)")?;
            Domain::annulus([c.num(0)?, c.num(1)?], c.num(2)?, c.num(3)?)
        }
        "ellipse" => {
            c.arity(4, "ellipse(cx, cy, a, b)")?;
            Domain::ellipse([c.num(0)?, c.num(1)?], c.num(2)?, c.num(3)?)
        }
        "half_graph" => {
            c.arity(3, "half_graph(a, half_width, top)")?;
            Domain::half_graph(Graph { a: c.num(0)? }, c.num(1)?, c.num(2)?)
        }
        other => {
            return Err(c
                .span
                .error(format!("unknown domain `{other}`; expected ball, annulus, ellipse or half_graph")))
        }
    };
    dom.map_err(|err| core_error(e.value_span, err))
}

fn parse_operator(e: &Entry) -> Result<OperatorSpec, ParseError> {
    let c = Call::parse(e)?;
    let pair = |i: usize| -> Result<EllipticityPair, ParseError> {
        EllipticityPair::new(c.num(i)?, c.num(i + 1)?).map_err(|err| core_error(c.span, err))
    };
    Ok(match c.name {
        "laplacian" => {
            c.arity(0, "laplacian")?;
            OperatorSpec::laplacian(2)
        }
        "pucci_plus" => {
            c.arity(2, "pucci_plus(lambda, Lambda)")?;
            OperatorSpec::pucci_plus(pair(0)?)
        }
        "pucci_minus" => {
            c.arity(2, "pucci_minus(lambda, Lambda)")?;
            OperatorSpec::pucci_minus(pair(0)?)
        }
        "linear" => {
            c.arity(5, "linear(a11, a12, a22, lambda, Lambda)")?;
            let (a11, a12, a22) = (c.num(0)?, c.num(1)?, c.num(2)?);
            let a = SymMatrix::from_rows(2, &[a11, a12, a12, a22]).map_err(|err| core_error(c.span, err))?;
            OperatorSpec::linear(a, pair(3)?)
        }
        other => {
            return Err(c.span.error(format!(
                "unknown operator `{other}`; expected laplacian, pucci_plus, pucci_minus or linear"
            )))
        }
    })
}

/// Points where position-dependent law coefficients are sampled.
fn law_samples(dom: &Domain) -> Vec<Point> {
    let [x0, y0, x1, y1] = dom.bounding_box();
    let m = 32;
    let mut pts = Vec::new();
    for i in 0..=m {
        for j in 0..=m {
            let x = [
                x0 + (x1 - x0) * i as f64 / m as f64,
                y0 + (y1 - y0) * j as f64 / m as f64,
            ];
            if dom.signed_distance(x) <= 0.0 {
                pts.push(x);
            }
        }
    }
    pts
}

fn parse_law(e: &Entry, dom: &Domain) -> Result<DegeneracyLaw, ParseError> {
    let c = Call::parse(e)?;
    let law = match c.name {
        "power" => {
            c.arity(1, "power(p)")?;
            DegeneracyLaw::power(c.num(0)?)
        }
        "double_phase" => {
            c.arity(3, "double_phase(p, q, a(x))")?;
            DegeneracyLaw::double_phase(c.num(0)?, c.num(1)?, c.expr(2)?.into_field(), &law_samples(dom))
        }
        "variable_exponent" => {
            c.arity(1, "variable_exponent(p(x))")?;
            DegeneracyLaw::variable_exponent(c.expr(0)?.into_field(), &law_samples(dom))
        }
        other => {
            return Err(c.span.error(format!(
                "unknown law `{other}`; expected power, double_phase or variable_exponent"
            )))
        }
    };
    law.map_err(|err| core_error(e.value_span, err))
}

fn parse_point(e: &Entry) -> Result<Point, ParseError> {
    let parts = split_list(&e.value);
    if parts.len() != 2 {
        return Err(e.value_span.error(format!("`{}` must be a point `x, y`", e.key)));
    }
    Ok([
        number_at(parts[0].1, e.value_span.shifted(parts[0].0))?,
        number_at(parts[1].1, e.value_span.shifted(parts[1].0))?,
    ])
}

fn parse_numbers(e: &Entry) -> Result<Vec<f64>, ParseError> {
    split_list(&e.value)
        .into_iter()
        .map(|(off, s)| number_at(s, e.value_span.shifted(off)))
        .collect()
}

fn unknown(section: &str, e: &Entry, keys: &[&str]) -> ParseError {
    e.key_span.error(format!(
        "unknown key `{}` in `[{section}]`; expected one of {}",
        e.key,
        keys.join(", ")
    ))
}

impl ExperimentConfig {
    /// Parses and validates a config; `name` is used when the config has no
    /// `name` key.
    pub fn parse(text: &str, name: &str) -> Result<ExperimentConfig, ParseError> {
        let sections = lex(text)?;
        let find = |s: &str| sections.iter().find(|x| x.0 == s);
        let end = Span {
            line: text.lines().count().max(1),
            column: 1,
        };

        // [problem]
        let (_, pspan, pentries) = find("problem").ok_or_else(|| end.error("missing `[problem]` section"))?;
        const PROBLEM_KEYS: [&str; 9] = ["name", "description", "domain", "operator", "law", "f", "g", "beta_g", "exact"];
        let get = |entries: &'_ [Entry], k: &str| entries.iter().find(|e| e.key == k).cloned();
        for e in pentries {
            if !PROBLEM_KEYS.contains(&e.key.as_str()) {
                return Err(unknown("problem", e, &PROBLEM_KEYS));
            }
        }
        let need = |k: &str| get(pentries, k).ok_or_else(|| pspan.error(format!("`[problem]` needs `{k}`")));
        let domain = parse_domain(&need("domain")?)?;
        let operator = parse_operator(&need("operator")?)?;
        let law = parse_law(&need("law")?, &domain)?;
        let f = expr(&need("f")?)?;
        let g = expr(&need("g")?)?;
        let beta_g = match get(pentries, "beta_g") {
            Some(e) => {
                let v = number(&e)?;
                if !(v > 0.0 && v < 1.0) {
                    return Err(e.value_span.error("`beta_g` must lie in (0, 1)"));
                }
                v
            }
            None => 0.5,
        };
        let exact = get(pentries, "exact").map(|e| expr(&e)).transpose()?;
        let config_name = get(pentries, "name").map_or_else(|| name.to_string(), |e| e.value);
        let description = get(pentries, "description").map_or_else(String::new, |e| e.value);
        // Fields must evaluate on the domain.
        for (key, ex) in [("f", Some(&f)), ("g", Some(&g)), ("exact", exact.as_ref())] {
            if let Some(ex) = ex {
                let bad = law_samples(&domain).into_iter().find(|&x| !ex.eval(x).is_finite());
                if let Some(x) = bad {
                    let e = get(pentries, key).unwrap();
                    return Err(e.value_span.error(format!("`{key}` is not finite at ({}, {})", x[0], x[1])));
                }
            }
        }

        // [grid]
        let (_, gspan, gentries) = find("grid").ok_or_else(|| end.error("missing `[grid]` section"))?;
        const GRID_KEYS: [&str; 3] = ["h", "levels", "stencil"];
        let mut grid = GridConfig {
            h: f64::NAN,
            levels: 1,
            stencil: 2,
        };
        for e in gentries {
            match e.key.as_str() {
                "h" => grid.h = positive(e)?,
                "levels" => {
                    grid.levels = integer(e)?;
                    if grid.levels == 0 || grid.levels > 6 {
                        return Err(e.value_span.error("`levels` must lie in 1..=6"));
                    }
                }
                "stencil" => {
                    grid.stencil = integer(e)?;
                    if !(1..=3).contains(&grid.stencil) {
                        return Err(e.value_span.error("`stencil` must be 1, 2 or 3"));
                    }
                }
                _ => return Err(unknown("grid", e, &GRID_KEYS)),
            }
        }
        if grid.h.is_nan() {
            return Err(gspan.error("`[grid]` needs `h`"));
        }
        let h_entry = get(gentries, "h").unwrap();
        pucci_core::geometry::build_grid(&domain, grid.h, 1).map_err(|err| core_error(h_entry.value_span, err))?;

        // [solve]
        let mut solve = SolveConfig::default();
        let mut epsilon_coupling = EpsilonCoupling::Fixed;
        const SOLVE_KEYS: [&str; 11] = [
            "epsilon_coupling",
            "epsilons",
            "eta_factors",
            "cfl",
            "tolerance",
            "max_iterations",
            "relaxation",
            "omega",
            "clamp",
            "barrier_k",
            "start",
        ];
        if let Some((_, sspan, sentries)) = find("solve") {
            for e in sentries {
                match e.key.as_str() {
                    "epsilons" => solve.epsilons = parse_numbers(e)?,
                    "epsilon_coupling" => {
                        epsilon_coupling = match e.value.as_str() {
                            "fixed" => EpsilonCoupling::Fixed,
                            "h2" => EpsilonCoupling::H2,
                            _ => return Err(e.value_span.error("`epsilon_coupling` must be fixed or h2")),
                        }
                    }
                    "eta_factors" => solve.eta_factors = parse_numbers(e)?,
                    "cfl" => solve.cfl = positive(e)?,
                    "tolerance" => solve.tolerance = positive(e)?,
                    "max_iterations" => solve.max_iterations = integer(e)?,
                    "relaxation" => {
                        solve.relaxation = match e.value.as_str() {
                            "sor" => Relaxation::ColoredSor,
                            "jacobi" => Relaxation::Jacobi,
                            _ => return Err(e.value_span.error("`relaxation` must be sor or jacobi")),
                        }
                    }
                    "omega" => solve.omega = if e.value == "auto" { None } else { Some(positive(e)?) },
                    "clamp" => solve.clamp = boolean(e)?,
                    "barrier_k" => solve.barrier_k = if e.value == "auto" { None } else { Some(positive(e)?) },
                    "start" => {
                        solve.start = match e.value.as_str() {
                            "below" => Start::Below,
                            "above" => Start::Above,
                            _ => return Err(e.value_span.error("`start` must be below or above")),
                        }
                    }
                    _ => return Err(unknown("solve", e, &SOLVE_KEYS)),
                }
            }
            solve.validate().map_err(|err| core_error(*sspan, err))?;
        }

        // [experiments]
        let mut experiments = vec![Experiment::Solve];
        if let Some((_, _, eentries)) = find("experiments") {
            for e in eentries {
                if e.key != "run" {
                    return Err(unknown("experiments", e, &["run"]));
                }
                experiments.clear();
                for (off, s) in split_list(&e.value) {
                    let x = Experiment::parse(s).ok_or_else(|| {
                        e.value_span.shifted(off).error(format!(
                            "unknown experiment `{s}`; expected one of solve, abp, barrier, comparison, regularity, assumptions"
                        ))
                    })?;
                    if !experiments.contains(&x) {
                        experiments.push(x);
                    }
                }
            }
        }

        // [verify]
        let mut verify = VerifyConfig::default();
        const VERIFY_KEYS: [&str; 20] = [
            "abp_offset",
            "error_factor",
            "error_max",
            "order_min",
            "sandwich_tol",
            "abp_variation",
            "barrier_delta",
            "barrier_gamma",
            "comparison_pairs",
            "comparison_h",
            "fit_center",
            "fit_rho",
            "fit_kmax",
            "alpha_min",
            "alpha_max",
            "alpha_sharp_tol",
            "alpha_bar",
            "eps0",
            "smallness_center",
            "monotonicity_trials",
        ];
        if let Some((_, _, ventries)) = find("verify") {
            for e in ventries {
                match e.key.as_str() {
                    "error_factor" => verify.error_factor = Some(positive(e)?),
                    "error_max" => verify.error_max = Some(positive(e)?),
                    "order_min" => verify.order_min = Some(number(e)?),
                    "sandwich_tol" => verify.sandwich_tol = positive(e)?,
                    "abp_variation" => verify.abp_variation = Some(positive(e)?),
                    "abp_offset" => verify.abp_offset = number(e)?,
                    "barrier_delta" => verify.barrier_delta = positive(e)?,
                    "barrier_gamma" => {
                        let v = positive(e)?;
                        if v >= 1.0 {
                            return Err(e.value_span.error("`barrier_gamma` must lie in (0, 1)"));
                        }
                        verify.barrier_gamma = v;
                    }
                    "comparison_pairs" => verify.comparison_pairs = integer(e)?,
                    "comparison_h" => verify.comparison_h = positive(e)?,
                    "fit_center" => verify.fit_center = Some(parse_point(e)?),
                    "fit_rho" => {
                        let v = positive(e)?;
                        if v >= 1.0 {
                            return Err(e.value_span.error("`fit_rho` must lie in (0, 1)"));
                        }
                        verify.fit_rho = v;
                    }
                    "fit_kmax" => {
                        let k = integer(e)?;
                        if k < 2 {
                            return Err(e.value_span.error("`fit_kmax` must be at least 2"));
                        }
                        verify.fit_kmax = k as u32;
                    }
                    "alpha_min" => verify.alpha_min = Some(number(e)?),
                    "alpha_max" => verify.alpha_max = Some(number(e)?),
                    "alpha_sharp_tol" => verify.alpha_sharp_tol = Some(positive(e)?),
                    "alpha_bar" => verify.alpha_bar = Some(positive(e)?),
                    "eps0" => {
                        let v = positive(e)?;
                        if v >= 1.0 {
                            return Err(e.value_span.error("`eps0` must lie in (0, 1)"));
                        }
                        verify.eps0 = v;
                    }
                    "smallness_center" => verify.smallness_center = Some(parse_point(e)?),
                    "monotonicity_trials" => verify.monotonicity_trials = integer(e)?.max(1),
                    _ => return Err(unknown("verify", e, &VERIFY_KEYS)),
                }
            }
        }

        // [output]
        let mut output = None;
        if let Some((_, _, oentries)) = find("output") {
            for e in oentries {
                if e.key != "dir" {
                    return Err(unknown("output", e, &["dir"]));
                }
                output = Some(PathBuf::from(&e.value));
            }
        }

        Ok(ExperimentConfig {
            name: config_name,
            description,
            problem: ProblemConfig {
                domain,
                operator,
                law,
                f,
                g,
                beta_g,
                exact,
            },
            grid,
            solve,
            epsilon_coupling,
            experiments,
            verify,
            output,
        })
    }
}
