//! Scenario handling, synthetic coefficient fields and the experiment driver
//! behind the `fracporo` command.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision,
    clippy::type_complexity
)]

pub mod experiment;
pub mod scenario;
pub mod synthetic;
pub mod verify;

/// Failures of the command-line layer, each with a stage context.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{stage}: {source}")]
    Core {
        stage: &'static str,
        #[source]
        source: fracporo::Error,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// Process exit code: 2 for invalid input, 3 for numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Scenario(_) => 2,
            CliError::Core { source, .. } => match source {
                fracporo::Error::Numerical(_) => 3,
                fracporo::Error::Io(_) => 1,
                _ => 2,
            },
            CliError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Attaches a stage name to core errors.
pub(crate) trait Stage<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> Stage<T> for fracporo::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Core { stage, source })
    }
}
