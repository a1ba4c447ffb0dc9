use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A case document field is missing, mistyped or out of range.
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// A cross-reference (bus id, line id) that does not resolve.
    #[error("reference error at `{path}`: {message}")]
    Reference { path: String, message: String },

    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: i64 },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("case text line {line}: {message}")]
    CaseText { line: usize, message: String },

    #[error("unsupported bus type code {0}")]
    UnsupportedBusType(i64),

    #[error("unknown line id {0}")]
    UnknownLine(usize),

    #[error("chromosome has {got} genes but the network has {expected} loads")]
    ChromosomeLength { expected: usize, got: usize },

    #[error("gene {index} = {value} is outside [0, 1]")]
    GeneOutOfRange { index: usize, value: f64 },

    #[error("line {0} is in service with zero impedance")]
    ZeroImpedance(usize),

    #[error("network has no slack bus")]
    NoSlack,

    #[error("bus {0} carries demand or generation but is not connected to the slack bus")]
    Disconnected(u32),

    #[error("power flow did not converge")]
    NotConverged,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("exhaustive search over {points} points exceeds the limit of {limit}")]
    InstanceTooLarge { points: u128, limit: u128 },

    #[error("{cases} outage combinations exceed the cap of {cap}")]
    TooManyCases { cases: u128, cap: u128 },

    #[error("run {0} not found")]
    NotFound(String),

    #[error("run {0} is already stored with different content")]
    AlreadyStored(String),

    #[error("run {0} failed its checksum")]
    Checksum(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn reference(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Reference {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Field path for schema and reference errors, e.g. `lines[12].to`.
    pub fn field_path(&self) -> Option<&str> {
        match self {
            Error::Schema { path, .. } | Error::Reference { path, .. } => Some(path),
            _ => None,
        }
    }
}
