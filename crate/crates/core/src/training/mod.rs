//! Losses, negative sampling, gradients, optimizer, and the training loop.

mod backward;
mod gradcheck;
mod loss;
mod optimizer;
mod sampler;
mod trainer;

pub use backward::{backward, batch_loss, Batch, BatchExample, BatchMasks, Objective};
pub use gradcheck::{
    fixture, fixture_dims, fixture_objective, gradcheck, BlockError, GradcheckFixture, FD_STEP, REL_FLOOR,
};
pub use loss::{loss, loss_and_grad, LossKind, LOSS_EPS};
pub use optimizer::{clip_global_norm, optimizer_step, OptimizerConfig, OptimizerState};
pub use sampler::{NegativeSampler, SamplerConfig};
pub use trainer::{train, write_log_csv, ExampleStats, LogRow, TrainConfig, TrainData, TrainOutcome};
