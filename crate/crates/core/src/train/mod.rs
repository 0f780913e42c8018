//! Mini-batch training: Adam with coupled weight decay, global-norm
//! clipping, teacher-forced token accuracy and early stopping.

mod optim;
mod trainer;

pub use optim::{adam_step, clip_gradients, AdamState, TrainingConfig};
pub use trainer::{
    evaluate_pairs, token_accuracy, token_matches, train, train_with, EpochRecord, TrainOutcome, TrainReport,
    REPORT_HEADER,
};

use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("no non-PAD target positions")]
    EmptyMask,
    #[error("training and validation sets must be non-empty")]
    EmptyCorpus,
    /// Training hit a NaN or infinity; `best` holds the last good snapshot.
    #[error("non-finite value detected in {what}; aborting with the best snapshot")]
    NonFinite { what: String, best: Box<TrainOutcome> },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("epoch callback failed: {0}")]
    Callback(String),
}
