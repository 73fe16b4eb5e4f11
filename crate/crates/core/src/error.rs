use alloc::string::String;

/// Failures raised by the numerical routines.
///
/// Structural findings such as "this kernel admits no minorization" are not
/// errors; they are returned as ordinary values by the `doeblin` module.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel entry ({row}, {col}) = {value} is negative or not finite")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("{what} must be strictly positive (entry {index} = {value})")]
    NonPositive {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("power iteration did not converge after {iterations} iterations (last change {last_change:e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("rank-one inverse is near singular: 1 - b[a] = {denominator:e}")]
    NearSingular { denominator: f64 },

    #[error("resolvent of the rank-one operator has a pole at {0}")]
    PoleAt(f64),

    #[error("lambda = {lambda} is not above the spectral radius estimate {rho}")]
    BelowSpectralRadius { lambda: f64, rho: f64 },

    #[error("Neumann series needs lambda = {lambda} above the operator norm {norm}")]
    NotConvergent { lambda: f64, norm: f64 },

    #[error("lambda I - R is ill conditioned (estimate {estimate:e})")]
    IllConditioned { estimate: f64 },

    #[error("matrix is singular to working precision")]
    Singular,

    #[error("lambda = {lambda} is an eigenvalue of T (D = {d:e})")]
    AtEigenvalue { lambda: f64, d: f64 },

    #[error("D has no sign change on ({lower}, {upper}]")]
    NoSignChange { lower: f64, upper: f64 },

    #[error("series converges too slowly (ratio {ratio})")]
    SlowConvergence { ratio: f64 },

    #[error("invalid certificate: worst slack {worst_slack:e}")]
    InvalidCertificate { worst_slack: f64 },

    #[error("mollifier centred at {center} with radius {epsilon} contains no quadrature node")]
    EmptySupport { center: f64, epsilon: f64 },

    #[error("radius {epsilon} resolves only {nodes} node(s); refine the grid")]
    GridTooCoarse { epsilon: f64, nodes: usize },

    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn ensure_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
