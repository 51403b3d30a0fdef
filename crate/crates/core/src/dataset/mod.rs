//! SMDP datasets: credit assignment over logged sessions, chunked samples,
//! the approximated dataset built from complete levels, and participant
//! splits.

mod credit;
mod io;
mod samples;
mod smb;
mod split;

use thiserror::Error;

use crate::events::LogError;
use crate::level::LevelError;

pub use credit::{assign_credit, final_reward, CreditConfig, CreditMap, CreditedAddition};
pub use io::{read_samples, samples_from_jsonl, samples_to_jsonl, write_samples};
pub use samples::{build_log_dataset, build_samples, ActionEntry, LogDataset, SmdpSample};
pub use smb::{build_smb_samples, SMB_PARTICIPANT};
pub use split::{split_by_participant, test_count, DatasetSplit};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("credit assignment: {0}")]
    Credit(String),
    #[error("invalid credit config: {0}")]
    Config(String),
    #[error("turn structure: {0}")]
    Structure(String),
    #[error("invalid sample: {0}")]
    Sample(String),
    #[error("split: {0}")]
    Split(String),
    #[error("{0}")]
    Empty(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
