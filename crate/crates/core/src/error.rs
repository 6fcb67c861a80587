use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation (negative time, log of zero, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller broke a precondition: wrong boundary tag, mismatched grids, bad ordering.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A model hypothesis on the kernel or friction law does not hold.
    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    #[error("blow-up in field `{field}` (max |value| = {magnitude:e})")]
    BlowUp { field: &'static str, magnitude: f64 },

    #[error("step failure: {0}")]
    StepFailure(String),

    #[error("step {step} (t = {t}): {source}")]
    AtStep {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// `I - A` (or another system matrix) could not be factored.
    #[error("solvability failure: {0}")]
    Singular(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Strips step context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtStep { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_blow_up(&self) -> bool {
        matches!(self.root(), Error::BlowUp { .. })
    }

    pub fn is_hypothesis(&self) -> bool {
        matches!(self.root(), Error::Hypothesis(_))
    }
}
