use alloc::string::String;
use alloc::vec::Vec;

/// Every failure mode of the library. Variants map one-to-one onto the
/// error kinds a caller can act on.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("supermatrix is not positive semidefinite: residual diagonal {residual:e} at pivot {index}")]
    NotPsd { residual: f64, index: usize },
    #[error("degenerate denominator {gap:e} for excitation ({i},{j})->({a},{b})")]
    DegenerateGap { i: usize, j: usize, a: usize, b: usize, gap: f64 },
    #[error("vector norm {norm} differs from 1")]
    Normalization { norm: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{branches} branches exceed selector capacity {capacity}")]
    Capacity { branches: usize, capacity: usize },
    #[error("mask error: {0}")]
    Mask(String),
    #[error("operator norm {norm} exceeds 1")]
    SpectralBound { norm: f64 },
    #[error("pool does not fit skeleton at addresses {addresses:?}: {reason}")]
    Bind { addresses: Vec<String>, reason: String },
    #[error("topology violation: dial sheet binds {found}, skeleton is {expected}")]
    Topology { expected: String, found: String },
    #[error("model-space index {0} lies outside the particle sector")]
    Sector(usize),
    #[error("every overlap eigenvalue is below the threshold")]
    DegenerateBasis,
    #[error("rank {rank} is below the requested {requested}")]
    Rank { rank: usize, requested: usize },
    #[error("tensor is zero")]
    ZeroTensor,
}

pub type Result<T> = core::result::Result<T, Error>;
