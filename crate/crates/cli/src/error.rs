use thiserror::Error;

/// Failures of a run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical blow-up suspected at t = {time}")]
    BlowUp { time: f64 },

    #[error("{0}")]
    Failed(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::BlowUp { .. } => 3,
        }
    }
}

impl From<dqfield::Error> for CliError {
    fn from(e: dqfield::Error) -> Self {
        use dqfield::Error as E;
        match e {
            E::BlowUp { time } => CliError::BlowUp { time },
            E::InvalidGrid(_)
            | E::InvalidPotential(_)
            | E::GridTooLarge { .. }
            | E::DegreeCap { .. }
            | E::GridMismatch
            | E::Shape { .. }
            | E::Json(_) => CliError::Config(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}
