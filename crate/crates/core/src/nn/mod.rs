//! Dense network stack: matrices, forward/backward passes, optimizers,
//! losses and checkpoint files.

mod checkpoint;
mod loss;
mod matrix;
mod network;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use loss::{loss_and_grad, LossKind};
pub use matrix::Matrix;
pub use network::{
    Activation, ActivationTrace, ForwardCache, Gradients, InitKind, InitSpec, Layer, LayerSpec,
    Network, DEFAULT_LEAKY_SLOPE,
};
pub use optim::{OptState, OptimizerKind, DQN_ADAM_EPS};
