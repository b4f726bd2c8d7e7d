use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("integration diverged after t = {last_t}")]
    Diverged { last_t: f64 },
    #[error("matrix is singular to tolerance (sigma_min ~ {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },
    #[error("unknown surface `{0}`")]
    UnknownSurface(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("chart is not an immersion at ({u}, {v})")]
    Immersion { u: f64, v: f64 },
    #[error("point ({u}, {v}) lies outside the chart domain")]
    OutsideDomain { u: f64, v: f64 },
    #[error("wrong regime: {0}")]
    Regime(String),
    #[error("surface is planar near the point (second fundamental form vanishes)")]
    Planar,
    #[error("constant curvature on every sample point")]
    ConstantCurvature,
    #[error("curvature gradient vanishes on the region")]
    CriticalPoint,
    #[error("obstruction violated: c1 = {c1:e}, c2 = {c2:e}")]
    Obstructed { c1: f64, c2: f64 },
    #[error("grid too short: {0}")]
    Grid(String),
    #[error("dimension estimate is unstable under refinement ({coarse} vs {fine})")]
    Inconclusive { coarse: usize, fine: usize },
    #[error("Dirichlet problem is not uniquely solvable (sigma_min = {sigma_min:e})")]
    NonUnique { sigma_min: f64, kernel: Vec<f64> },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("step too large for stability: {0}")]
    Stability(String),
    #[error("point is not covered by the auxiliary grid: {0}")]
    Coverage(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
