//! Minimal 1D network engine with explicit backpropagation.

pub mod adam;
pub mod arch;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod model;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use arch::{build_arch, ArchDescriptor, ArchName, LayerKind, LayerSpec};
pub use loss::bce_loss;
pub use model::{batch_from_windows, Grads, LayerParams, Model, ModelParams};
pub use tensor::{Scalar, Tensor};
