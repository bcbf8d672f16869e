mod accumulator;
mod hyper;
mod step;
mod trainer;

pub use accumulator::{Accumulator, StepUpdate};
pub use hyper::HyperParams;
pub use step::{momentum_step, momentum_update, sgd_step, sgd_update};
pub use trainer::{noise_statistics, run, Checkpoint, TrainOptions, Trainer, TrajectoryLog, CHECKPOINT_VERSION};
