use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid function argument (fractions out of range, mismatched lengths, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Bad configuration, such as a missing class directory or unknown hyperparameter.
    #[error("configuration error: {0}")]
    Config(String),

    /// The dataset itself is unusable (no images for a class, ...).
    #[error("dataset error: {0}")]
    Dataset(String),

    /// Feature matrices that do not share one column schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A descriptor could not be computed for the given input.
    #[error("extraction error: {0}")]
    Extraction(String),

    #[error("segmentation error: {0}")]
    Segmentation(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("unsupported model '{0}': SVM, LightGBM and CatBoost are not implemented (available: knn, lr, mlp, rf, et)")]
    UnsupportedModel(String),

    #[error("image error at {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
