use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("grid spacing h = {h} does not resolve the hole; need h <= {required}")]
    Resolution { h: f64, required: f64 },

    #[error("the fluid node set is empty")]
    EmptyFluid,

    #[error("grid of {nodes} nodes (~{bytes} bytes) exceeds the configured cap of {cap} nodes")]
    TooLarge { nodes: usize, bytes: usize, cap: usize },

    #[error("singular operator: {0}")]
    Singular(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid exponent p = {0}; need 1 < p < infinity")]
    Exponent(f64),

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Best iterate seen, converted to f64.
        best: Vec<f64>,
    },

    #[error("eigen iteration did not converge after {iterations} iterations (last estimate {estimate:e}, gap ratio {gap:.3})")]
    EigenNonConvergence {
        iterations: usize,
        estimate: f64,
        gap: f64,
    },

    #[error("dimension {dim} exceeds the dense oracle cap of {cap}")]
    DenseCap { dim: usize, cap: usize },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("resolution mismatch: {0}")]
    ResolutionMismatch(String),

    #[error("aborted after {completed} completed rows: {message}")]
    Aborted { completed: usize, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error at {path}: {message}")]
    Io { path: String, message: String },
}
