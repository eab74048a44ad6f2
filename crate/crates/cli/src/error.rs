use thiserror::Error;

/// Errors surfaced by the command line, each with a fixed exit code.
///
/// | code | meaning |
/// |------|---------|
/// | 0 | success |
/// | 2 | usage error, unparsable material, params, table or weight file |
/// | 3 | file system error |
/// | 4 | numerical failure (grazing or degenerate directions, failed checks) |
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: flakelayer::Error,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// Sorts a library error into the exit-code classes.
    pub fn from_core(context: impl Into<String>, e: flakelayer::Error) -> Self {
        use flakelayer::Error as E;
        let context = context.into();
        match e {
            E::Io(source) => CliError::Io { context, source },
            E::GrazingSingularity | E::DegenerateHalfVector | E::UniformExhausted => {
                CliError::Numerical(format!("{context}: {e}"))
            }
            source => CliError::Parse { context, source },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
