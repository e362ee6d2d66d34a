//! Deterministic generator of small multi-domain corpora.
//!
//! Every episode pursues a goal built from a real database entity, so gold
//! responses always inform and answer every request. System templates follow
//! the user's template choice, which makes every gold response a function of
//! the dialogue so far: the corpus can be fit exactly.

mod episode;
mod pool;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Database, Delexicalizer, DomainSchema, EntityRecord, SlotSpec};
use pool::{entity_capacity, value, POOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub domains: usize,
    pub slots_per_domain: usize,
    pub values_per_slot: usize,
    pub entities_per_domain: usize,
    pub train_episodes: usize,
    pub valid_episodes: usize,
    pub test_episodes: usize,
    pub max_turns: usize,
    pub multi_domain_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            domains: 3,
            slots_per_domain: 3,
            values_per_slot: 3,
            entities_per_domain: 8,
            train_episodes: 300,
            valid_episodes: 30,
            test_episodes: 60,
            max_turns: 6,
            multi_domain_fraction: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic corpus config: {0}")]
    Config(String),
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.domains == 0 || self.domains > POOL.len() {
            return bad(format!("domains must be in 1..={}", POOL.len()));
        }
        if self.slots_per_domain == 0 || self.slots_per_domain > 4 {
            return bad("slots_per_domain must be in 1..=4".into());
        }
        if self.values_per_slot == 0 || self.values_per_slot > 5 {
            return bad("values_per_slot must be in 1..=5".into());
        }
        let cap = POOL[..self.domains]
            .iter()
            .map(entity_capacity)
            .min()
            .unwrap_or(0);
        if self.entities_per_domain == 0 || self.entities_per_domain > cap {
            return bad(format!("entities_per_domain must be in 1..={cap}"));
        }
        if self.train_episodes == 0 || self.valid_episodes == 0 || self.test_episodes == 0 {
            return bad("episode counts must be positive".into());
        }
        if self.max_turns < 2 {
            return bad("max_turns must be at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.multi_domain_fraction) {
            return bad("multi_domain_fraction must be in [0, 1]".into());
        }
        Ok(())
    }
}

/// Generated splits sharing one schema set and database.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub train: Corpus,
    pub valid: Corpus,
    pub test: Corpus,
}

/// Independent seed for stream `stream`, item `index` of a master seed.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const STREAM_DB: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_VALID: u64 = 3;
const STREAM_TEST: u64 = 4;

fn schemas(cfg: &SynthConfig) -> Vec<DomainSchema> {
    POOL[..cfg.domains]
        .iter()
        .map(|def| DomainSchema {
            name: def.name.to_string(),
            informable: def.slots[..cfg.slots_per_domain]
                .iter()
                .map(|s| SlotSpec {
                    name: s.name.to_string(),
                    values: s.values[..cfg.values_per_slot]
                        .iter()
                        .map(|v| v.to_string())
                        .collect(),
                })
                .collect(),
            requestable: def.requestable.iter().map(|(n, _)| n.to_string()).collect(),
            offer_slot: (def.offer.0 != "name").then(|| def.offer.0.to_string()),
        })
        .collect()
}

fn database(cfg: &SynthConfig) -> Database {
    let mut db = Database::default();
    for (d, def) in POOL[..cfg.domains].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_DB, d as u64));
        let records = (0..cfg.entities_per_domain)
            .map(|i| {
                let mut slots = BTreeMap::new();
                for s in &def.slots[..cfg.slots_per_domain] {
                    let v = s.values[rng.gen_range(0..cfg.values_per_slot)];
                    slots.insert(s.name.to_string(), v.to_string());
                }
                for &(name, gen) in def.requestable {
                    slots.insert(name.to_string(), value(gen, d, i));
                }
                slots.insert(def.offer.0.to_string(), value(def.offer.1, d, i));
                EntityRecord {
                    id: format!("{}-{i}", def.name),
                    slots,
                }
            })
            .collect();
        db.domains.insert(def.name.to_string(), records);
    }
    db
}

/// Generates the train, validation and test splits.
pub fn gen_corpus(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let schemas = schemas(cfg);
    let database = database(cfg);
    let delex = Delexicalizer::new(&schemas, &database);
    let split = |stream: u64, prefix: &str, n: usize| Corpus {
        schemas: schemas.clone(),
        database: database.clone(),
        episodes: (0..n)
            .map(|i| {
                let seed = derive_seed(cfg.seed, stream, i as u64);
                episode::generate(cfg, &database, &delex, format!("{prefix}-{i:04}"), seed)
            })
            .collect(),
    };
    Ok(SynthCorpus {
        config: cfg.clone(),
        train: split(STREAM_TRAIN, "train", cfg.train_episodes),
        valid: split(STREAM_VALID, "valid", cfg.valid_episodes),
        test: split(STREAM_TEST, "test", cfg.test_episodes),
    })
}

#[cfg(test)]
mod tests;
