//! Corpus metrics: BLEU-4, entity recall, and episode-level inform and
//! success rates.

mod bleu;
mod report;
mod task;

use alloc::string::String;

pub use bleu::{bleu4, ngram_stats, BleuStats};
pub use report::{evaluate, gold_responses, DomainScores, MetricReport};
pub use task::{
    entity_recall, episode_outcome, inform_success, mean_entity_recall, EpisodeOutcome,
};

/// Generated responses indexed by episode, then turn.
pub type Responses = alloc::vec::Vec<alloc::vec::Vec<alloc::vec::Vec<String>>>;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("empty corpus")]
    Empty,
    #[error("{what}: expected {expected} items, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("goal references unknown domain {0}")]
    UnknownDomain(String),
}

#[cfg(test)]
mod tests;
