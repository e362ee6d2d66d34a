//! Minimal reverse-mode differentiation over `f64` tensors, with Adam.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod params;
mod tape;
mod tensor;

use alloc::string::String;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{config_hash, decode_checkpoint, encode_checkpoint, CheckpointManifest};
pub use gradcheck::{grad_check, grad_check_params, relative_error, ParamCheck};
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{softmax_rows, Backward, OpKind, Tape, Var};
pub use tensor::{Shape, Tensor};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DiffError {
    #[error("{op}: incompatible shapes {left} and {right}")]
    ShapeMismatch {
        op: OpKind,
        left: Shape,
        right: Shape,
    },
    #[error("{op}: unsupported operand shape {shape}")]
    BadOperand { op: OpKind, shape: Shape },
    #[error("{op}: index {index} out of range for extent {extent}")]
    IndexOutOfRange {
        op: OpKind,
        index: usize,
        extent: usize,
    },
    #[error("{0}: needs at least one input")]
    EmptyInput(OpKind),
    #[error("invalid shape {0}")]
    InvalidShape(Shape),
    #[error("shape {shape} does not hold {len} values")]
    DataLength { shape: Shape, len: usize },
    #[error("backward needs a scalar output, got shape {0}")]
    NotScalar(Shape),
    #[error("variable does not belong to this tape")]
    ForeignVar,
    #[error("tape has no parameter store")]
    NoParamStore,
    #[error("unknown parameter index {0}")]
    UnknownParam(usize),
    #[error("duplicate parameter name {0}")]
    DuplicateParam(String),
    #[error("parameter layouts differ")]
    LayoutMismatch,
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("learning rate must be non-negative, got {0}")]
    NegativeLearningRate(f64),
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
