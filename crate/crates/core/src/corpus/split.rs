use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::Corpus;
use crate::GENERAL_DOMAIN;

/// Position of a turn inside a corpus; the turns before it are its context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TurnRef {
    pub episode: usize,
    pub turn: usize,
}

/// Groups turns by domain tag. Tags that are not schema domains go to
/// `general`. Every turn lands in exactly one bucket.
pub fn split_by_domain(corpus: &Corpus) -> BTreeMap<String, Vec<TurnRef>> {
    let mut buckets: BTreeMap<String, Vec<TurnRef>> = BTreeMap::new();
    for (e, ep) in corpus.episodes.iter().enumerate() {
        for (t, turn) in ep.turns.iter().enumerate() {
            buckets
                .entry(corpus.bucket_of(&turn.domain).to_string())
                .or_default()
                .push(TurnRef {
                    episode: e,
                    turn: t,
                });
        }
    }
    buckets
}

/// Turn counts for every schema domain plus `general`, zero counts included.
pub fn domain_turn_counts(corpus: &Corpus) -> Vec<(String, usize)> {
    let buckets = split_by_domain(corpus);
    corpus
        .domain_names()
        .chain(core::iter::once(GENERAL_DOMAIN))
        .map(|d| (d.to_string(), buckets.get(d).map_or(0, Vec::len)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Database, DomainSchema, Episode, Goal, Turn, Utterance};
    use alloc::vec;

    fn schema(name: &str) -> DomainSchema {
        DomainSchema {
            name: name.into(),
            informable: vec![],
            requestable: vec![],
            offer_slot: None,
        }
    }

    fn corpus(tags: &[&str]) -> Corpus {
        Corpus {
            schemas: vec![schema("hotel"), schema("taxi")],
            database: Database::default(),
            episodes: vec![Episode {
                id: "1".into(),
                goal: Goal::new(),
                turns: tags
                    .iter()
                    .map(|d| Turn {
                        user: Utterance::parse("u"),
                        system: Utterance::parse("s"),
                        domain: d.to_string(),
                        belief: Default::default(),
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn counts_per_tag() {
        let b = split_by_domain(&corpus(&["hotel", "hotel", "taxi"]));
        assert_eq!(b.len(), 2);
        assert_eq!(b["hotel"].len(), 2);
        assert_eq!(b["taxi"].len(), 1);
    }

    #[test]
    fn unknown_tags_go_to_general() {
        let b = split_by_domain(&corpus(&["bus", "general", "hotel"]));
        assert_eq!(b["general"].len(), 2);
    }

    #[test]
    fn buckets_partition_the_turns() {
        let c = corpus(&["hotel", "bus", "taxi", "general", "taxi"]);
        let total: usize = split_by_domain(&c).values().map(Vec::len).sum();
        assert_eq!(total, c.turn_count());
        let counts = domain_turn_counts(&c);
        assert_eq!(
            counts,
            vec![
                ("hotel".into(), 1),
                ("taxi".into(), 2),
                ("general".into(), 2)
            ]
        );
    }
}
