//! The state-conditioned teacher and the hierarchical student.
//!
//! Both models share the same building blocks: an embedding plus LSTM
//! utterance encoder and an LSTM decoder with dot-product attention over the
//! encoder outputs of the current user utterance. They differ in how the
//! latent action that initializes the decoder is computed.

mod checkpoint;
mod layers;
mod student;
mod teacher;

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::diffnum::DiffError;

pub use checkpoint::{
    load_student, load_teacher, save_student, save_teacher, schema_hash, CheckpointMeta,
};
pub use layers::{argmax, AttnDecoder, Decoded, Encoder, Lstm};
pub use student::{StudentInput, StudentModel};
pub use teacher::{teacher_action, TeacherInput, TeacherModel};

/// Range of the uniform parameter initialization.
pub const INIT_SCALE: f64 = 0.08;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embed_dim: usize,
    /// LSTM width; also the action dimension.
    pub hidden: usize,
    pub in_vocab: usize,
    pub out_vocab: usize,
    pub belief_dim: usize,
    pub db_dim: usize,
}

impl ModelConfig {
    /// Embedding 50, hidden 150.
    pub fn new(in_vocab: usize, out_vocab: usize, belief_dim: usize, db_dim: usize) -> Self {
        ModelConfig {
            embed_dim: 50,
            hidden: 150,
            in_vocab,
            out_vocab,
            belief_dim,
            db_dim,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.hidden
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Teacher,
    Student,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Teacher => "teacher",
            ModelKind::Student => "student",
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("token id {id} out of range for vocabulary of {size}")]
    TokenOutOfRange { id: u32, size: usize },
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("checkpoint holds a {found} model, expected a {expected}")]
    KindMismatch { expected: String, found: String },
    #[error("checkpoint schema hash {found} does not match corpus schema hash {expected}")]
    SchemaMismatch { expected: String, found: String },
    #[error("missing or misshapen parameter {0}")]
    BadParameter(String),
    #[error("checkpoint metadata: {0}")]
    Meta(String),
}
