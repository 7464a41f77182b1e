use std::path::PathBuf;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error in {language} snippet: {message}")]
    Parse { language: String, message: String },

    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest schema error: {0}")]
    ManifestSchema(String),

    #[error("bad magic bytes, expected SCT1")]
    BadMagic,

    #[error("unsupported dtype code {0:#04x}")]
    UnsupportedDtype(u8),

    #[error("tensor dimensions invalid or overflow: {0}")]
    DimOverflow(String),

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },

    #[error("{0} trailing bytes after tensor payload")]
    TrailingBytes(usize),

    #[error("subword alignment mismatch: {0}")]
    AlignmentMismatch(String),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing tensor: {0}")]
    MissingTensor(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("distribution has zero total mass")]
    ZeroMassDistribution,

    #[error("distance function {function} cannot be used with {source_kind} source")]
    SourceFunctionMismatch {
        function: String,
        source_kind: String,
    },

    #[error("length mismatch: {words} words need {expected} distances, got {actual}")]
    LengthMismatch {
        words: usize,
        expected: usize,
        actual: usize,
    },

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("empty evaluation set")]
    EmptyEvalSet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error was caused by the caller's input rather than a bug.
    pub fn is_bad_input(&self) -> bool {
        !matches!(self, Error::Io { .. })
            || matches!(self, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
