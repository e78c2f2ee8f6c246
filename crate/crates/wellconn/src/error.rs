use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to diagnose a failed
/// run without a debugger; none of them are expected on well-formed inputs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed edge list at line {line}: {reason}")]
    MalformedInput { line: usize, reason: String },

    #[error("graph precondition violated: {0}")]
    Precondition(String),

    #[error("eigensolver did not converge: residual {residual:.3e} after {iters} iterations")]
    NoConvergence { residual: f64, iters: usize },

    #[error("mixing time exceeded cap {cap} (gamma {gamma})")]
    MixingCapExceeded { cap: usize, gamma: f64 },

    #[error("regular-sample retry cap {cap} exceeded for size {size}: best lambda2 {best:.4} < {threshold:.4}")]
    RetryCapExceeded { size: usize, cap: usize, best: f64, threshold: f64 },

    #[error("machine memory exceeded: {words} words > s = {s} (machine {machine}, {context})")]
    MemoryExceeded { machine: usize, words: usize, s: usize, context: String },

    #[error("duplicate key {key} in search table")]
    DuplicateKey { key: u64 },

    #[error("walk cover failure: {} of {total} vertices had no independent trial: {}{}",
        .uncovered.len(),
        .uncovered.iter().take(16).map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        if .uncovered.len() > 16 { ",..." } else { "" })]
    WalkCoverFailure { uncovered: Vec<u32>, total: usize },

    #[error("leader election aborted: orphan fraction {frac:.3} exceeds {limit:.3}")]
    OrphanOverflow { frac: f64, limit: f64 },

    #[error("sketch stage over budget: contracted graph has {got} vertices, budget {budget}")]
    SketchBudget { got: usize, budget: usize },

    #[error("sketch decode failed: {0}")]
    SketchDecode(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
