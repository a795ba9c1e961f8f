//! Error classes and their exit codes.

use robsens::bootstrap::BootstrapError;
use robsens::bounds::BoundsError;
use robsens::dataset::DataError;
use robsens::logistic::FitError;
use robsens::simulate::SimError;
use robsens::whole::WholeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("data error: {0}")]
    Data(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Config(_) => 4,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::Data(format!("propensity fit: {e}"))
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::InvalidParams(_) => CliError::Config(e.to_string()),
            BoundsError::Solver(_) => CliError::Solver(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<WholeError> for CliError {
    fn from(e: WholeError) -> Self {
        match e {
            WholeError::Bounds(b) => b.into(),
            WholeError::InvalidParams(_) | WholeError::EmptyGrid => CliError::Config(e.to_string()),
        }
    }
}

impl From<BootstrapError> for CliError {
    fn from(e: BootstrapError) -> Self {
        match e {
            BootstrapError::InvalidConfig(_) => CliError::Config(e.to_string()),
            BootstrapError::Fit(f) => f.into(),
            BootstrapError::Bounds(b) => b.into(),
            BootstrapError::Whole(w) => w.into(),
            BootstrapError::TooManyFailures { .. } | BootstrapError::Pool(_) => CliError::Solver(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::TooSmall(_) => CliError::Config(e.to_string()),
            SimError::Data(d) => d.into(),
            SimError::Fit(f) => f.into(),
            SimError::DegenerateArm => CliError::Data(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
