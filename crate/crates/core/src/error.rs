use std::fmt;

/// Pipeline stage that produced an error inside [`crate::optimizer::recover_grasp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Multilateration,
    Registration,
    Optimization,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Multilateration => "multilateration",
            Stage::Registration => "registration",
            Stage::Optimization => "optimization",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed URDF / OBJ text.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The kinematic description is not a single tree or is missing required data.
    #[error("invalid kinematic structure: {0}")]
    Structure(String),

    /// A caller violated an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data is unusable (empty mesh, non-finite values, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A geometric problem is rank deficient.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unknown {kind} `{name}`")]
    Lookup { kind: &'static str, name: String },

    /// Binary file decoding failed.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn in_stage(self, stage: Stage) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
