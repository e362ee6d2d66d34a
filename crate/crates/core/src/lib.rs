//! Multiple-teachers single-student distillation for task-oriented dialogue.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation: a small reverse-mode differentiation engine, the dialogue
//! data model and preprocessing, the teacher and student networks, the losses
//! and training loops, corpus metrics and a deterministic synthetic corpus
//! generator. File formats, the command line and threading live in the `mtss`
//! companion crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod corpus;
pub mod diffnum;
pub mod metrics;
pub mod models;
pub mod synth;
pub mod training;

mod math;

pub use diffnum::{DiffError, ParamStore, Tape, Tensor, Var};

/// Name of the catch-all domain for turns that carry no specific domain tag.
pub const GENERAL_DOMAIN: &str = "general";
