use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("cannot parse configuration: {0}")]
    ConfigParse(String),

    #[error("integration region [{lo}, {hi}] carries no spectral mass")]
    EmptyRegion { lo: f64, hi: f64 },

    #[error("singular value {shat} does not leave the bulk (edge at {edge})")]
    NotDetectable { shat: f64, edge: f64 },

    #[error("teacher singular value {sbar} is at or below the detection threshold {threshold}")]
    BelowThreshold { sbar: f64, threshold: f64 },

    #[error("initial mode strength {eps} must be below the target {shat}")]
    InvalidInit { eps: f64, shat: f64 },

    #[error("target mode strength must be positive, got {0}")]
    NonPositiveMode(f64),

    #[error("mode strength {s} outside [{lo}, {hi})")]
    OutOfRange { s: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    DimError(String),

    #[error("input design does not fit the sample count: {0}")]
    ModeError(String),

    #[error("training-aligned initialisation needs a dataset")]
    MissingDataset,

    #[error("training diverged at t/tau = {t}: error {value} (reduce the learning rate)")]
    Divergence { t: f64, value: f64 },

    #[error("bulk has {found} singular values, at least {needed} required")]
    TooFewModes { found: usize, needed: usize },

    #[error("noise scale could not be estimated: {0}")]
    NoiseScaleUnknown(String),

    #[error("composite aspect ratio {0} exceeds 1")]
    AspectError(f64),

    #[error("task Gram matrix is not positive semidefinite (smallest eigenvalue {0})")]
    SingularGram(f64),

    #[error("sampling regime mismatch: {0}")]
    RegimeError(String),

    #[error("unknown figure id {0:?}")]
    UnknownFigure(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 3 for numerical divergence, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } => 3,
            _ => 2,
        }
    }
}
