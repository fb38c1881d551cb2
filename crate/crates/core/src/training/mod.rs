//! Imbalance-aware losses, learning-rate schedule, optimizer and the
//! training loop.

mod loss;
mod optim;
mod schedule;
mod train;

pub use loss::{focal_loss, init_output_bias, pos_weight_from_counts, weighted_bce, LossKind, Objective, PROB_CLAMP};
pub use optim::AdamW;
pub use schedule::{scale_lr, stlr};
pub use train::{
    evaluate, predict, train, train_with_observer, EpochSummary, StopMetric, TrainConfig, TrainHistory, TrainSample,
};
