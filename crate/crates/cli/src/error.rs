use deconfound::Error;

pub const RUNTIME: u8 = 1;
pub const USAGE: u8 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub source: anyhow::Error,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(source: impl Into<anyhow::Error>) -> Self {
        Self {
            code: USAGE,
            source: source.into(),
        }
    }

    pub fn runtime(source: impl Into<anyhow::Error>) -> Self {
        Self {
            code: RUNTIME,
            source: source.into(),
        }
    }
}

/// Bad inputs and configuration are usage errors; everything else is a
/// runtime failure.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::DimensionMismatch { .. }
            | Error::Io { .. }
            | Error::Csv { .. }
            | Error::Json { .. }
            | Error::InvalidData(_) => USAGE,
            _ => RUNTIME,
        };
        Self {
            code,
            source: e.into(),
        }
    }
}

pub trait Context<T> {
    /// Marks a failure as a runtime error with a message.
    fn runtime(self, what: &str) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Context<T> for std::result::Result<T, E> {
    fn runtime(self, what: &str) -> CliResult<T> {
        self.map_err(|e| CliError::runtime(e.into().context(what.to_string())))
    }
}
