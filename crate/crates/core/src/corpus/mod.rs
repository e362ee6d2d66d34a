//! Dialogue data model and preprocessing.

mod delex;
mod dialogue;
mod schema;
mod split;
mod state;
mod vocab;

use alloc::string::String;

pub use delex::{
    delexicalize, is_placeholder, parse_placeholder, placeholder, placeholders_in, tokenize,
    Delexicalized, Delexicalizer, ValueMatch,
};
pub use dialogue::{BeliefState, Corpus, DomainGoal, Episode, Goal, Turn, Utterance};
pub use schema::{Database, DomainSchema, EntityRecord, SlotSpec};
pub use split::{domain_turn_counts, split_by_domain, TurnRef};
pub use state::{
    build_belief_vector, db_pointer, oracle_state, BeliefVector, DbPointer, StateLayout,
};
pub use vocab::{build_vocab, VocabOptions, VocabRole, Vocabulary, BOS, EOS, PAD, UNK};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("unknown slot {domain}.{slot}")]
    UnknownSlot { domain: String, slot: String },
    #[error("value {value:?} is not in the value set of {domain}.{slot}")]
    UnknownValue {
        domain: String,
        slot: String,
        value: String,
    },
    #[error("corpus has no turns")]
    EmptyCorpus,
    #[error("turn index {index} out of range for episode {episode} ({len} turns)")]
    TurnOutOfRange {
        episode: String,
        index: usize,
        len: usize,
    },
    #[error("invalid corpus: {0}")]
    Invalid(String),
}
