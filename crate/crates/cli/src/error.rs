//! Exit-code contract: 0 success, 2 input error, 3 sampler error,
//! 4 artifact/standardization mismatch.

use h2meta_core::Error as CoreError;

pub const INPUT_ERROR: i32 = 2;
pub const SAMPLER_ERROR: i32 = 3;
pub const MISMATCH_ERROR: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::Sampler(_) => SAMPLER_ERROR,
            CoreError::ChainFormat(_) | CoreError::Mismatch(_) => MISMATCH_ERROR,
            _ => INPUT_ERROR,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(INPUT_ERROR, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
