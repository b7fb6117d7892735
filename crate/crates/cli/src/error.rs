use delay_hopf::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        #[source]
        source: CoreError,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn core(module: &'static str) -> impl FnOnce(CoreError) -> CliError {
        move |source| CliError::Core { module, source }
    }

    pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for solver failures, 4 for failed
    /// validation, 1 for i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core { source, .. } => match source {
                CoreError::Config(_)
                | CoreError::Assumption(_)
                | CoreError::WrongCase(_)
                | CoreError::AmbiguousCase(_)
                | CoreError::GridMismatch { .. } => 2,
                _ => 3,
            },
            CliError::Invariant(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
