use std::path::Path;

use dro_core::Error;

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const VALIDATION: u8 = 2;
    pub const DATA: u8 = 3;
    pub const TOLERANCE: u8 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or configuration, detected before any computation.
    #[error("{0}")]
    Validation(String),

    /// A library error, with the file or step it came from.
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: Error,
    },

    /// The run completed but a reported quantity exceeded its tolerance.
    #[error("{0}")]
    Tolerance(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn at(context: impl Into<String>, source: Error) -> Self {
        CliError::Core {
            context: context.into(),
            source,
        }
    }

    pub fn file(path: &Path, source: Error) -> Self {
        Self::at(path.display().to_string(), source)
    }

    /// Caller mistakes (contract, structure, unknown names) are validation
    /// errors; everything else a library call reports is a data error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Tolerance(_) => exit::TOLERANCE,
            CliError::Core { source, .. } => match source.root() {
                Error::Contract(_) | Error::Structure(_) | Error::Lookup { .. } => exit::VALIDATION,
                _ => exit::DATA,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Attaches context to library results.
pub trait Context<T> {
    fn context(self, context: impl FnOnce() -> String) -> CliResult<T>;
    fn in_file(self, path: &Path) -> CliResult<T>;
}

impl<T> Context<T> for dro_core::Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::at(context(), e))
    }

    fn in_file(self, path: &Path) -> CliResult<T> {
        self.map_err(|e| CliError::file(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dro_core::Stage;

    #[test]
    fn exit_codes_follow_the_root_cause() {
        let contract = CliError::at("x", Error::Contract("bad".into()));
        assert_eq!(contract.exit_code(), exit::VALIDATION);
        let staged = CliError::at(
            "x",
            Error::Stage {
                stage: Stage::Multilateration,
                source: Box::new(Error::Degenerate("flat".into())),
            },
        );
        assert_eq!(staged.exit_code(), exit::DATA);
        let format = CliError::at("x", Error::Format { offset: 3, message: "short".into() });
        assert_eq!(format.exit_code(), exit::DATA);
        assert_eq!(CliError::Tolerance("t".into()).exit_code(), exit::TOLERANCE);
    }
}
