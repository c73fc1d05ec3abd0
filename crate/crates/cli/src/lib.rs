//! Campaign runner, archive replay and result reporting for `morlot`.

pub mod campaign;
pub mod config;
pub mod replay;
pub mod report;

pub use campaign::{execute_run, read_results, run_campaign, run_campaign_with, ArchiveFile, ResultRow, RunSummary};
pub use config::CampaignConfig;
pub use report::{build_report, Report};

/// Exit status for a bad configuration, input file or argument.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status when an archived violation does not reproduce.
pub const EXIT_REPRODUCTION: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{0}")]
    Io(String),

    #[error("campaign interrupted after {completed} of {total} runs")]
    Interrupted { completed: usize, total: usize },

    #[error(transparent)]
    Core(#[from] morlot::Error),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::InsufficientData(_) => EXIT_CONFIG,
            CliError::Core(morlot::Error::Config(_) | morlot::Error::UnknownEnv(_) | morlot::Error::Json(_)) => EXIT_CONFIG,
            _ => 1,
        }
    }
}
