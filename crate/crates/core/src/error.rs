use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A linear system or similar construction has no unique solution.
    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("resource limit: {0}")]
    Resource(String),

    /// A computation needs a quantity the problem does not carry.
    #[error("missing capability: {0}")]
    Capability(String),

    /// Stepsizes fall outside the admissible regime of a bound.
    #[error("stepsize regime violated: {}", .0.join("; "))]
    Regime(Vec<String>),

    /// An iterate left the finite range.
    #[error("iterate became non-finite in round {round}")]
    Diverged { round: usize },

    #[error("inconsistent data: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
