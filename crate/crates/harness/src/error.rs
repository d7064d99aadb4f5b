use std::fmt;

/// Pipeline stage an error came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Split,
    TrainTarget,
    PropertyAttack,
    SubgraphAttack,
    Reconstruction,
    Defense,
    Transfer,
    Report,
    Store,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Split => "split",
            Stage::TrainTarget => "train-target",
            Stage::PropertyAttack => "attack property",
            Stage::SubgraphAttack => "attack subgraph",
            Stage::Reconstruction => "attack reconstruct",
            Stage::Defense => "defend",
            Stage::Transfer => "transfer",
            Stage::Report => "report",
            Stage::Store => "store",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {message}")]
pub struct HarnessError {
    pub stage: Stage,
    pub message: String,
}

impl HarnessError {
    pub fn new(stage: Stage, message: impl Into<String>) -> Self {
        HarnessError {
            stage,
            message: message.into(),
        }
    }
}

/// Tags any displayable error with a stage.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, HarnessError>;
}

impl<T, E: fmt::Display> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, HarnessError> {
        self.map_err(|e| HarnessError::new(stage, e.to_string()))
    }
}

pub type HarnessResult<T> = Result<T, HarnessError>;
