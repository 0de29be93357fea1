//! Experiment orchestration: configuration, figure data and oracle checks.

mod config;
mod figures;
mod oracle_check;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::error::Error;

pub use config::{
    ExperimentConfig, Family, FigureId, FileConfig, FigureSection, LearningOverrides, McSection,
    ModelSection, BRIDGED_TRAINING, CHAIN_TRAINING, DEFAULT_ETA_GRID, DEFAULT_REPLICATIONS,
    DEFAULT_SEED, STAR_TRAINING,
};
pub use figures::{
    compute_figure, run_figure, write_figure, FigureData, IfaRow, Panel, PanelRows,
    StratificationRow, IFA_HEADER, STRATIFICATION_HEADER,
};
pub use oracle_check::{
    run_oracle_check, OracleCheckConfig, OracleReport, OracleRow, EXACTNESS_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Model(Error),

    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("check failed: {0}")]
    Acceptance(String),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn csv(path: &Path, err: csv::Error) -> Self {
        HarnessError::io(path, err.into())
    }

    /// Process exit status: 2 for bad configuration, 3 for a failed check,
    /// 4 for I/O or exhausted budgets.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Model(e) if e.is_resource() => 4,
            HarnessError::Model(_) => 2,
            HarnessError::Acceptance(_) => 3,
            HarnessError::Io { .. } => 4,
        }
    }
}

impl From<Error> for HarnessError {
    fn from(e: Error) -> Self {
        HarnessError::Model(e)
    }
}
