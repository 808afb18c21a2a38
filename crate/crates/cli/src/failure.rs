//! Exit codes.

pub const VERIFY: u8 = 1;
pub const CONFIG: u8 = 2;
pub const INTEGRATION: u8 = 3;
pub const INDETERMINATE: u8 = 4;

/// A command outcome other than success. `error` is printed to stderr when set.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: Option<anyhow::Error>,
}

impl Failure {
    pub fn config(e: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: CONFIG,
            error: Some(e.into()),
        }
    }

    pub fn silent(code: u8) -> Self {
        Failure { code, error: None }
    }
}

pub type CmdResult = Result<(), Failure>;

/// Any error while setting a command up counts as a configuration error.
pub trait OrConfig<T> {
    fn or_config(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrConfig<T> for Result<T, E> {
    fn or_config(self) -> Result<T, Failure> {
        self.map_err(Failure::config)
    }
}
