use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("nonpositive metric coefficient: a={a}, b={b}, c={c}")]
    NonpositiveState { a: f64, b: f64, c: f64 },
    #[error("lambda = {0} is unsupported here; the reduced alpha equation needs lambda = 0")]
    UnsupportedLambda(f64),
    #[error("scale factor must be positive, got {0}")]
    NonpositiveFactor(f64),
    #[error("alpha = 0: first integral ab/alpha undefined")]
    DivisionByZeroAlpha,
    #[error("operation not available for group {0}")]
    UnsupportedGroup(String),
    #[error("no unstable direction at this equilibrium")]
    NoUnstableDirection,
    #[error("no sign choice keeps the seed inside the positive orthant")]
    SeedLeavesPositiveOrthant,
    #[error("invalid integrator options: {0}")]
    InvalidOptions(String),
    #[error("chart integrand changes sign; cannot build a monotone coordinate")]
    NonmonotoneChart,
    #[error("mesh point {0} outside trajectory range [{1}, {2}]")]
    OutOfRange(f64, f64, f64),
    #[error("trajectory is in chart {0}, expected {1}")]
    ChartMismatch(String, String),
    #[error("series recursion obstructed at order {order}: {reason}")]
    RecursionObstruction { order: usize, reason: String },
    #[error("series order {have} too small, need at least {need}")]
    InsufficientOrder { have: usize, need: usize },
    #[error("endpoint kind does not resolve the integral limit: {0}")]
    UnresolvedEndpoint(String),
    #[error("too few samples near the endpoint for a fit ({0})")]
    InsufficientSamples(usize),
    #[error("trajectory violates the 0 <= c^2 - a^2 <= 2 alpha region: {0}")]
    NotCase3(String),
    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
