use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::*;
use crate::corpus::{
    build_vocab, db_pointer, oracle_state, split_by_domain, tokenize, Corpus, VocabOptions,
    VocabRole,
};
use crate::metrics::{gold_responses, inform_success};

fn small() -> SynthConfig {
    SynthConfig {
        seed: 7,
        train_episodes: 60,
        valid_episodes: 10,
        test_episodes: 10,
        ..SynthConfig::default()
    }
}

#[test]
fn same_seed_same_corpus() {
    let a = gen_corpus(&small()).unwrap();
    let b = gen_corpus(&small()).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a.train).unwrap(),
        serde_json::to_string(&b.train).unwrap()
    );
    let c = gen_corpus(&SynthConfig { seed: 8, ..small() }).unwrap();
    assert_ne!(a.train, c.train);
}

#[test]
fn counts_and_turn_bounds_follow_the_config() {
    for max_turns in [2, 3, 4, 6, 9] {
        let cfg = SynthConfig {
            max_turns,
            ..small()
        };
        let s = gen_corpus(&cfg).unwrap();
        assert_eq!(s.train.episodes.len(), 60);
        assert_eq!(s.valid.episodes.len(), 10);
        assert_eq!(s.test.episodes.len(), 10);
        for e in &s.train.episodes {
            assert!(
                (2..=max_turns).contains(&e.turns.len()),
                "{} turns",
                e.turns.len()
            );
        }
    }
}

#[test]
fn corpora_validate_and_gold_responses_succeed() {
    let s = gen_corpus(&small()).unwrap();
    for c in [&s.train, &s.valid, &s.test] {
        c.validate().unwrap();
        assert_eq!(inform_success(c, &gold_responses(c)).unwrap(), (1.0, 1.0));
    }
}

#[test]
fn every_goal_is_solvable() {
    let s = gen_corpus(&small()).unwrap();
    for e in &s.train.episodes {
        for (d, g) in &e.goal {
            assert!(s.train.database.count(d, &g.constraints) > 0);
            assert!(g.offer && !g.requested.is_empty());
        }
    }
}

#[test]
fn multi_domain_fraction_is_respected_at_the_extremes() {
    let single = gen_corpus(&SynthConfig {
        multi_domain_fraction: 0.0,
        ..small()
    })
    .unwrap();
    assert!(single.train.episodes.iter().all(|e| e.goal.len() == 1));
    let multi = gen_corpus(&SynthConfig {
        multi_domain_fraction: 1.0,
        ..small()
    })
    .unwrap();
    assert!(multi.train.episodes.iter().all(|e| e.goal.len() == 2));
}

#[test]
fn no_raw_values_survive_delexicalization() {
    let s = gen_corpus(&small()).unwrap();
    let mut values: Vec<Vec<String>> = Vec::new();
    for records in s.train.database.domains.values() {
        for r in records {
            values.extend(r.slots.values().map(|v| tokenize(v)));
        }
    }
    for t in s.train.episodes.iter().flat_map(|e| &e.turns) {
        for utt in [t.user.tokens(), t.system.tokens()] {
            for v in &values {
                assert!(
                    !utt.windows(v.len()).any(|w| w == &v[..]),
                    "{v:?} in {utt:?}"
                );
            }
        }
    }
}

#[test]
fn responses_are_functions_of_the_model_inputs() {
    let s = gen_corpus(&SynthConfig {
        seed: 3,
        ..SynthConfig::default()
    })
    .unwrap();
    let c = &s.train;
    let layout = c.layout();
    type State = (Vec<String>, Vec<u64>, Vec<u64>);
    let mut by_state: BTreeMap<State, &[String]> = BTreeMap::new();
    let mut by_history: BTreeMap<Vec<String>, &[String]> = BTreeMap::new();
    for e in &c.episodes {
        let mut history: Vec<String> = Vec::new();
        for t in &e.turns {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            let key = (
                t.user.tokens().to_vec(),
                bits(&layout.belief_vector(&t.belief).unwrap().0),
                bits(&layout.db_pointer(&t.belief, &c.database).0),
            );
            let prev = by_state.insert(key, t.system.tokens());
            assert!(
                prev.is_none_or(|p| p == t.system.tokens()),
                "teacher ambiguity in {}",
                e.id
            );
            history.extend(t.user.tokens().iter().cloned());
            history.push(String::from("|"));
            let prev = by_history.insert(history.clone(), t.system.tokens());
            assert!(
                prev.is_none_or(|p| p == t.system.tokens()),
                "student ambiguity in {}",
                e.id
            );
            history.extend(t.system.tokens().iter().cloned());
            history.push(String::from("|"));
        }
    }
}

#[test]
fn input_vocabulary_covers_most_tokens() {
    let s = gen_corpus(&SynthConfig::default()).unwrap();
    let v = build_vocab(&s.train, VocabRole::Input, VocabOptions::default()).unwrap();
    let (mut known, mut total) = (0usize, 0usize);
    for t in s.train.episodes.iter().flat_map(|e| &e.turns) {
        for tok in t.user.tokens().iter().chain(t.system.tokens()) {
            total += 1;
            known += v.contains(tok) as usize;
        }
    }
    assert!(known as f64 / total as f64 >= 0.95, "{known}/{total}");
    let out = build_vocab(&s.train, VocabRole::Output, VocabOptions::default()).unwrap();
    assert!(
        out.len() < 500,
        "output vocabulary is not truncated: {}",
        out.len()
    );
}

#[test]
fn oracle_state_tracks_constraints() {
    let s = gen_corpus(&SynthConfig {
        seed: 11,
        ..SynthConfig::default()
    })
    .unwrap();
    let c: &Corpus = &s.train;
    let layout = c.layout();
    let mut saw_greeting = false;
    for e in &c.episodes {
        let (bv, ptr) = oracle_state(e, 0, &c.schemas, &c.database).unwrap();
        if e.turns[0].domain == crate::GENERAL_DOMAIN {
            saw_greeting = true;
            assert!(bv.0.iter().all(|&x| x == 0.0));
        }
        for (i, t) in e.turns.iter().enumerate() {
            let (bv, ptr) = oracle_state(e, i, &c.schemas, &c.database).unwrap();
            let informed: usize = t.belief.values().map(|m| m.len()).sum();
            assert_eq!(bv.0.iter().filter(|&&x| x == 1.0).count(), informed);
            for (k, schema) in c.schemas.iter().enumerate() {
                let cons = t.belief.get(&schema.name).cloned().unwrap_or_default();
                let expected = db_pointer(c.database.query(&schema.name, &cons).unwrap().len());
                assert_eq!(&ptr.0[4 * k..4 * k + 4], &expected[..]);
            }
        }
        assert_eq!(ptr.0.len(), layout.db_dim());
        assert!(oracle_state(e, e.turns.len(), &c.schemas, &c.database).is_err());
    }
    assert!(saw_greeting);
}

#[test]
fn turn_counts_per_domain_add_up() {
    let s = gen_corpus(&small()).unwrap();
    let buckets = split_by_domain(&s.train);
    let total: usize = buckets.values().map(Vec::len).sum();
    assert_eq!(total, s.train.turn_count());
    assert!(buckets.contains_key(crate::GENERAL_DOMAIN));
    for d in s.train.domain_names() {
        assert!(!buckets[d].is_empty(), "{d}");
    }
}

#[test]
fn all_pool_domains_generate() {
    let cfg = SynthConfig {
        domains: 7,
        slots_per_domain: 4,
        values_per_slot: 5,
        entities_per_domain: 20,
        ..small()
    };
    let s = gen_corpus(&cfg).unwrap();
    s.train.validate().unwrap();
    assert_eq!(
        inform_success(&s.train, &gold_responses(&s.train)).unwrap(),
        (1.0, 1.0)
    );
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        SynthConfig {
            domains: 0,
            ..small()
        },
        SynthConfig {
            domains: 8,
            ..small()
        },
        SynthConfig {
            max_turns: 1,
            ..small()
        },
        SynthConfig {
            multi_domain_fraction: 1.5,
            ..small()
        },
        SynthConfig {
            multi_domain_fraction: f64::NAN,
            ..small()
        },
        SynthConfig {
            entities_per_domain: 1000,
            ..small()
        },
        SynthConfig {
            train_episodes: 0,
            ..small()
        },
    ];
    for cfg in bad {
        assert!(gen_corpus(&cfg).is_err(), "{cfg:?}");
    }
}

#[test]
fn round_trips_through_json() {
    let s = gen_corpus(&small()).unwrap();
    let text = serde_json::to_string(&s.train).unwrap();
    let back: Corpus = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s.train);
}

#[test]
fn derived_seeds_differ() {
    assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
    assert_ne!(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
    assert_eq!(derive_seed(5, 6, 7), derive_seed(5, 6, 7));
}
