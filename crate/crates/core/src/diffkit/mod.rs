//! Small reverse-mode toolkit: parameter tensors, softmax/cross-entropy,
//! affine layers, Adadelta, finite-difference checking and checkpoints.
//!
//! Layers implement their own backward passes; there is no tape.

mod checkpoint;
mod gradcheck;
mod linear;
mod loss;
mod optim;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use linear::Linear;
pub use loss::{
    argmax, cross_entropy, log_softmax, softmax, softmax_backward, softmax_cross_entropy, NORMALIZATION_TOLERANCE,
};
pub use optim::{Adadelta, AdadeltaConfig, Sgd};
pub use tensor::{ParamTensor, Parameterized};
