use thiserror::Error;

/// Errors raised by the fitting, data and experiment layers.
#[derive(Debug, Error)]
pub enum SpcaError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate noise estimate: {0}")]
    DegenerateNoise(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<SpcaError>,
    },
}

impl SpcaError {
    pub fn context(self, context: impl Into<String>) -> Self {
        SpcaError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with all context layers stripped.
    pub fn root(&self) -> &SpcaError {
        match self {
            SpcaError::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            SpcaError::Numerical(_) | SpcaError::DegenerateNoise(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, SpcaError>;

pub(crate) trait ResultExt<T> {
    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context_with<F: FnOnce() -> String>(self, f: F) -> Result<T> {
        self.map_err(|e| e.context(f()))
    }
}

pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(SpcaError::Numerical(format!("{what} is not finite ({value})")))
    }
}
