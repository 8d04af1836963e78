use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid MCS table: {0}")]
    McsTable(String),

    #[error("invalid scenario config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("KPI undefined: {0}")]
    KpiUndefined(String),

    #[error("incompatible runs: {0}")]
    Incompatible(String),
}

impl SimError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> SimError {
        SimError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
