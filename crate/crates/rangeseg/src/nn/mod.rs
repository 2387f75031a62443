//! Minimal CPU neural-network engine: tensors, an eager autodiff tape,
//! convolution kernels, gradient checking, SGD, and weight snapshots.

pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod ops;
pub mod optim;
pub mod tensor;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, parse_checkpoint, save_checkpoint, CheckpointError,
    CHECKPOINT_MAGIC,
};
pub use graph::{Graph, LayerKind, LayerSpec, Mode, NnError, NodeId, NodeKind};
pub use optim::SgdMomentum;
pub use tensor::{Scalar, Tensor};
