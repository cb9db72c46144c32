use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mode index 0 is excluded from the reference instantiation")]
    ZeroMode,
    #[error("gram matrix at weight {0} is singular: pairing is degenerate")]
    Degenerate(u32),
    #[error("expansion domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("expanding ({i} - {j})^{exponent} needs {i} to precede {j} in the domain")]
    WrongRegion { i: String, j: String, exponent: i64 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` already in use")]
    VariableCollision(String),
    #[error("scale factor must be nonzero")]
    ZeroScale,
    #[error("point violates the domain ordering: {0}")]
    DomainViolation(String),
    #[error("division by zero at variable `{0}`")]
    DivisionByZero(String),
    #[error("cutoff {cutoff} too small: {what}")]
    Underflow { cutoff: i64, what: String },
    #[error("shuffle split s = {s} out of range for {n} insertions")]
    ShuffleRange { s: usize, n: usize },
    #[error("permutation has {got} letters, expected {expected}")]
    SizeMismatch { got: usize, expected: usize },
    #[error("not a permutation: {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("cluster domain violation: {0}")]
    ClusterDomain(String),
    #[error("ordering violation: {0}")]
    Ordering(String),
    #[error("|eps| = {eps} violates the annulus bound {bound}")]
    Annulus { eps: f64, bound: f64 },
    #[error("epsilon power {l} beyond weight cutoff {cutoff}")]
    BeyondCutoff { l: u32, cutoff: u32 },
    #[error("position with m = 0 is terminal")]
    Terminal,
    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("empty sample set")]
    EmptySamples,
    #[error("unsupported: {0}")]
    Unsupported(String),
}
