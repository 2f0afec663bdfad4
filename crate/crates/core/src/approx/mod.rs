//! Small fully-connected networks with hand-written backpropagation, SGD and Adam,
//! and the replay memories used by the sampling-based solvers.

mod buffer;
mod mlp;
mod optim;

pub use buffer::{CircularReplayBuffer, ReservoirBuffer};
pub use mlp::{stack, Grads, LossKind, Mlp, TrainBatch};
pub use optim::{AdamState, Optimizer, OptimizerKind, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
