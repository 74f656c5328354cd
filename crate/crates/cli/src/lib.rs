//! Library side of the `mmt` binary: input loading and the batch driver.

pub mod batch;
pub mod input;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input; exits with 64.
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] mmt_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub const PARSE_EXIT: i32 = 64;
    pub const FAILURE_EXIT: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => Self::PARSE_EXIT,
            _ => Self::FAILURE_EXIT,
        }
    }
}

pub use batch::{run_batch, BatchOptions, BatchOutput, BatchReport, PairRow};
pub use input::load_decomposition;
