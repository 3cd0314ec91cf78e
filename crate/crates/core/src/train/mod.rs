//! Weighted losses and the adversarial training loop.

pub mod loss;
mod optim;
mod routine;

pub use loss::{adversarial_loss, classification_loss, DiscriminatorScores, LossBreakdown, PROB_FLOOR};
pub use optim::{clip_by_player, Adam};
pub use routine::{
    lambda_schedule, train, train_baseline, train_step, EpochRecord, LambdaSchedule, TrainConfig, TrainingData,
    TrainingLog,
};
