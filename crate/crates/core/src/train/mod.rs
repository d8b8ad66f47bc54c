//! End-to-end optimization of the guidance network.

mod adam;
mod loss;
mod schedule;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::{loss, loss_tensor, LossConfig, LossValue, PerceptualMode};
pub use schedule::cosine_lr;
pub use trainer::{
    metrics_csv, split_dataset, train, train_with_validation, EpochMetrics, TrainConfig,
    TrainOutcome, METRICS_CSV_HEADER,
};
