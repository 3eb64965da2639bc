use thiserror::Error;

/// Errors raised across the identification pipeline.
///
/// The variants mirror the failure classes the CLI maps onto exit codes:
/// input/validation problems versus numerical breakdowns.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The structural model cannot be used as requested (mechanism, wrong path).
    #[error("model error: {0}")]
    Model(String),

    /// Matrix dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Data and prior together fail to determine some parameter directions.
    #[error("identifiability error: {message}")]
    Identifiability {
        message: String,
        /// Basis vectors (one per entry) spanning the detected null directions.
        null_directions: Vec<Vec<f64>>,
    },

    /// Non-finite values, step underflow and similar numerical breakdowns.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Monte-Carlo sweep exceeded its failure budget.
    #[error("sweep error: {0}")]
    Sweep(String),

    /// Configuration or data failed validation. All findings are reported together.
    #[error("validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    /// Structured-text parse failure (the message carries line/column).
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Wraps an error with the pipeline stage it originated from.
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for failures caused by the numerics rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::Identifiability { .. } | Error::Sweep(_) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// Innermost error, skipping stage annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Attach a stage tag to an error result.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
