use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("singular metric at node {node}")]
    SingularMetric { node: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("no asymptotic expansion known for {0}")]
    NoExpansionKnown(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("degenerate surface: {0}")]
    DegenerateSurface(String),
    #[error("no convergence after {iters} iterations (last change {last_change:.3e})")]
    NoConvergence { iters: usize, last_change: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("unknown boundary component {0}")]
    UnknownComponent(usize),
    #[error("missing boundary value for component {0}")]
    MissingBoundaryValue(usize),
    #[error("no bisection bracket for component {component}: f(0) = {f_lo:.3e}, f(1) = {f_hi:.3e}")]
    NoBracket { component: usize, f_lo: f64, f_hi: f64 },
    #[error("tuner iterate increased component {component} by {increase:.3e}")]
    MonotonicityViolation { component: usize, increase: f64 },
    #[error("level {level} is near-critical")]
    NearCriticalLevel { level: f64 },
    #[error("{skipped} of {total} level samples were near-critical")]
    TooManySkipped { skipped: usize, total: usize },
    #[error("open mesh: {0}")]
    OpenMesh(String),
    #[error("barrier residual sign violated at {location}: residual {value:.3e}")]
    ResidualSignViolation { location: String, value: f64 },
    #[error("foliation broken: |grad u| = {grad:.3e} at node {node}")]
    FoliationBroken { node: usize, grad: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
