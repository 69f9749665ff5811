use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("grid spacing h = {h} too large: must be below {limit} (ball radius / 4)")]
    GridTooCoarse { h: f64, limit: f64 },

    #[error("domain is degenerate: {0}")]
    DegenerateDomain(String),

    #[error("stencil arm leaves the bounding box at node {node:?}")]
    OutsideBox { node: [i64; 2] },

    #[error("point outside the C² strip of the distance function (d = {d}, strip = {strip})")]
    OutsideStrip { d: f64, strip: f64 },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error(
        "no convergence after {iterations} iterations at eps = {epsilon}: residual {residual:e} (tol {tolerance:e})"
    )]
    NoConvergence {
        iterations: usize,
        epsilon: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("expression error at column {column}: {message}")]
    Expr { column: usize, message: String },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
