//! Minimisers over flattened network parameters.

mod adam;
mod lbfgs;
mod train;

pub use adam::{adam_step, AdamState};
pub use lbfgs::{
    lbfgs_minimize, CurvaturePair, Evaluation, IterationInfo, LbfgsConfig, LbfgsOutcome, LbfgsState,
    StepRecord, Termination,
};
pub use train::{train_observed, train_pipeline, Phase, Progress, Schedule, TraceRow, TrainOutcome};
