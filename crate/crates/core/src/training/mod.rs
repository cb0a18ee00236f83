//! Frame-level SGD training with a cross-validation driven schedule.

mod checkpoint;
mod data;
mod schedule;
mod trainer;

pub use checkpoint::{load_checkpoint, save_checkpoint, TrainCheckpoint, TRAIN_MAGIC};
pub use data::{Batch, BatchTargets, Dataset, Sequence, Targets};
pub use schedule::{schedule_update, Phase, TrainConfig, TrainState};
pub use trainer::{
    argmax, epoch_order, evaluate_cv, evaluate_loss, fit, train, train_epoch, EpochRecord,
};
