//! Losses, teacher routing and the training loops.

mod data;
mod ensemble;
mod eval;
mod loops;
mod losses;
#[cfg(test)]
mod tests;

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusError;
use crate::diffnum::DiffError;
use crate::metrics::MetricError;
use crate::models::ModelError;

pub use data::{Dataset, EncodedTurn, Vocabs};
pub use ensemble::{route_teacher, TeacherEnsemble};
pub use eval::{
    generate_responses, score_turns, teacher_forced_accuracy, ResponseModel, TurnScores,
};
pub use loops::{
    finetune_domain_teacher, student_objective, teacher_objective, teacher_targets, train_student,
    train_teachers, train_universal_teacher, DivergenceReport, EpochLog, FinetuneOutcome,
    Selection, StudentLoss, StudentOutcome, TeacherTargets, TeachersOutcome,
};
pub use losses::{
    combined_loss, kd_policy_loss, kd_policy_on_tape, kd_text_loss, kd_text_on_tape, nll_loss,
    nll_on_tape, Clamped, LossBundle, PROB_FLOOR,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    /// Weight of the text-level distillation term.
    pub alpha1: f64,
    /// Weight of the policy-level distillation term.
    pub alpha2: f64,
    pub lr: f64,
    /// Epochs for the universal teacher and the student.
    pub epochs: usize,
    /// Epochs for each domain teacher.
    pub finetune_epochs: usize,
    pub seed: u64,
    /// Optional global gradient-norm clip.
    pub grad_clip: Option<f64>,
    /// Start domain teachers from the universal teacher.
    pub warm_start: bool,
    /// Turns per update; gradients are summed over the batch.
    pub batch_size: usize,
    /// Generation limit used for validation.
    pub max_response_len: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            alpha1: 0.005,
            alpha2: 0.005,
            lr: 0.005,
            epochs: 10,
            finetune_epochs: 5,
            seed: 0,
            grad_clip: None,
            warm_start: true,
            batch_size: 1,
            max_response_len: 40,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.alpha1 >= 0.0
            && self.alpha1.is_finite()
            && self.alpha2 >= 0.0
            && self.alpha2.is_finite())
        {
            return bad("alpha1 and alpha2 must be finite and non-negative");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            return bad("grad_clip must be positive");
        }
        if self.max_response_len == 0 {
            return bad("max_response_len must be at least 1");
        }
        Ok(())
    }

    /// True when the student needs teacher outputs at all.
    pub fn distills(&self) -> bool {
        self.alpha1 > 0.0 || self.alpha2 > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("expected {expected} positions, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("expected width {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("no teacher for domain {0}")]
    MissingTeacher(String),
    #[error("training set is empty")]
    EmptyCorpus,
    #[error("training diverged at epoch {} step {}", .0.epoch, .0.step)]
    Diverged(alloc::boxed::Box<DivergenceReport>),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}
