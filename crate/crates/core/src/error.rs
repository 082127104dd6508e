use std::path::PathBuf;

/// Errors produced while validating inputs, building models or running experiments.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown block id {0}")]
    UnknownBlock(usize),

    #[error("unknown user id {0}")]
    UnknownUser(usize),

    #[error("mini-slot (f={f}, t={t}) lies outside the {freq_units}x{time_units} grid")]
    SlotOutOfGrid {
        f: usize,
        t: usize,
        freq_units: usize,
        time_units: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("URLLC user {0} has no slack u_k defined")]
    MissingSlack(usize),

    #[error("node limit must be positive")]
    InvalidNodeLimit,

    #[error("no slack preset for demand {demand_kbps} kbps at latency {latency_ms} ms")]
    MissingSlackPreset { demand_kbps: f64, latency_ms: f64 },

    #[error("allocation failed verification ({method}): {detail}")]
    Verification { method: String, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("malformed CSV row {row}: {detail}")]
    CsvParse { row: usize, detail: String },
}

impl Error {
    /// True for failures of the internal consistency checks, as opposed to bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Verification { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
