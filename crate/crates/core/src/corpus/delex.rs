//! Replacing slot values and entity attributes with `[domain_slot]` placeholders.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Database, DomainSchema};

const PUNCTUATION: &[char] = &['.', ',', '?', '!', ';', ':', '"', '(', ')'];

/// Values that are never substituted because they collide with ordinary words.
const SKIP_VALUES: &[&str] = &["", "yes", "no", "none", "dontcare", "not mentioned", "?"];

pub fn placeholder(domain: &str, slot: &str) -> String {
    format!("[{domain}_{slot}]")
}

pub fn is_placeholder(token: &str) -> bool {
    token.len() > 3 && token.starts_with('[') && token.ends_with(']') && token.contains('_')
}

/// Splits `[domain_slot]` into its parts. Domain names contain no `_`.
pub fn parse_placeholder(token: &str) -> Option<(&str, &str)> {
    if !is_placeholder(token) {
        return None;
    }
    token[1..token.len() - 1].split_once('_')
}

pub fn placeholders_in<S: AsRef<str>>(tokens: &[S]) -> BTreeSet<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| is_placeholder(t))
        .map(str::to_string)
        .collect()
}

/// Lowercases, splits on whitespace and detaches leading/trailing punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let lower = raw.to_lowercase();
        let body_start = lower.find(|c| !PUNCTUATION.contains(&c));
        let Some(start) = body_start else {
            out.extend(lower.chars().map(|c| c.to_string()));
            continue;
        };
        let end = lower
            .rfind(|c| !PUNCTUATION.contains(&c))
            .map(|i| i + lower[i..].chars().next().map_or(1, char::len_utf8))
            .unwrap_or(lower.len());
        out.extend(lower[..start].chars().map(|c| c.to_string()));
        out.push(lower[start..end].to_string());
        out.extend(lower[end..].chars().map(|c| c.to_string()));
    }
    out
}

/// One substituted span.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueMatch {
    pub domain: String,
    pub slot: String,
    pub value: String,
    pub placeholder: String,
    /// Token position of the placeholder in the output.
    pub position: usize,
    /// Whether the slot is informable (a user constraint).
    pub informable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delexicalized {
    pub tokens: Vec<String>,
    pub placeholders: BTreeSet<String>,
    pub matches: Vec<ValueMatch>,
}

#[derive(Clone, Debug)]
struct Entry {
    tokens: Vec<String>,
    domain: String,
    slot: String,
    value: String,
    informable: bool,
    // (domain index, informable first, slot index)
    rank: (usize, usize, usize),
}

/// Longest-match value lexicon built from schemas and database records.
#[derive(Clone, Debug)]
pub struct Delexicalizer {
    by_first: BTreeMap<String, Vec<Entry>>,
}

impl Delexicalizer {
    pub fn new(schemas: &[DomainSchema], db: &Database) -> Self {
        let mut seen = BTreeSet::new();
        let mut by_first: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
        let mut add =
            |d: usize, domain: &str, slot: &str, value: &str, informable: bool, slot_idx: usize| {
                let tokens = tokenize(value);
                let joined = tokens.join(" ");
                if tokens.is_empty() || SKIP_VALUES.contains(&joined.as_str()) {
                    return;
                }
                if !seen.insert((joined, domain.to_string(), slot.to_string())) {
                    return;
                }
                by_first.entry(tokens[0].clone()).or_default().push(Entry {
                    tokens,
                    domain: domain.to_string(),
                    slot: slot.to_string(),
                    value: value.to_string(),
                    informable,
                    rank: (d, usize::from(!informable), slot_idx),
                });
            };
        for (d, schema) in schemas.iter().enumerate() {
            let records = db.records(&schema.name).unwrap_or(&[]);
            for (s, spec) in schema.informable.iter().enumerate() {
                for v in &spec.values {
                    add(d, &schema.name, &spec.name, v, true, s);
                }
                for r in records {
                    if let Some(v) = r.get(&spec.name) {
                        add(d, &schema.name, &spec.name, v, true, s);
                    }
                }
            }
            for (s, slot) in schema.requestable.iter().enumerate() {
                for r in records {
                    if let Some(v) = r.get(slot) {
                        add(d, &schema.name, slot, v, false, s);
                    }
                }
            }
            let offer = schema.offer_slot();
            if schema.all_slots().all(|s| s != offer) {
                for r in records {
                    if let Some(v) = r.get(offer) {
                        add(d, &schema.name, offer, v, false, schema.requestable.len());
                    }
                }
            }
        }
        Delexicalizer { by_first }
    }

    /// Tokenizes then delexicalizes raw text.
    pub fn apply(&self, text: &str, hint: Option<&str>) -> Delexicalized {
        self.apply_tokens(&tokenize(text), hint)
    }

    /// Greedy left-to-right replacement of the longest matching value.
    /// Equal-length candidates prefer the `hint` domain, then schema order.
    pub fn apply_tokens<S: AsRef<str>>(&self, tokens: &[S], hint: Option<&str>) -> Delexicalized {
        let mut out = Vec::with_capacity(tokens.len());
        let mut placeholders = BTreeSet::new();
        let mut matches = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let best = self.by_first.get(tokens[i].as_ref()).and_then(|cands| {
                cands
                    .iter()
                    .filter(|e| {
                        e.tokens.len() <= tokens.len() - i
                            && e.tokens
                                .iter()
                                .zip(&tokens[i..])
                                .all(|(a, b)| a == b.as_ref())
                    })
                    .min_by_key(|e| {
                        (
                            core::cmp::Reverse(e.tokens.len()),
                            hint.is_some_and(|h| h != e.domain),
                            e.rank,
                        )
                    })
            });
            match best {
                Some(e) => {
                    let ph = placeholder(&e.domain, &e.slot);
                    matches.push(ValueMatch {
                        domain: e.domain.clone(),
                        slot: e.slot.clone(),
                        value: e.value.clone(),
                        placeholder: ph.clone(),
                        position: out.len(),
                        informable: e.informable,
                    });
                    placeholders.insert(ph.clone());
                    out.push(ph);
                    i += e.tokens.len();
                }
                None => {
                    out.push(tokens[i].as_ref().to_string());
                    i += 1;
                }
            }
        }
        Delexicalized {
            tokens: out,
            placeholders,
            matches,
        }
    }
}

/// Delexicalizes one raw utterance. Build a [`Delexicalizer`] once when
/// processing many.
pub fn delexicalize(text: &str, db: &Database, schemas: &[DomainSchema]) -> Delexicalized {
    Delexicalizer::new(schemas, db).apply(text, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntityRecord, SlotSpec};
    use alloc::vec;
    use proptest::prelude::*;

    fn fixture() -> (Vec<DomainSchema>, Database) {
        let schemas = vec![
            DomainSchema {
                name: "restaurant".into(),
                informable: vec![
                    SlotSpec {
                        name: "food".into(),
                        values: vec!["north indian".into(), "thai".into()],
                    },
                    SlotSpec {
                        name: "area".into(),
                        values: vec!["north".into(), "south".into()],
                    },
                ],
                requestable: vec!["name".into(), "phone".into()],
                offer_slot: None,
            },
            DomainSchema {
                name: "hotel".into(),
                informable: vec![SlotSpec {
                    name: "area".into(),
                    values: vec!["north".into(), "east".into()],
                }],
                requestable: vec!["name".into()],
                offer_slot: None,
            },
        ];
        let mut db = Database::default();
        let rec = |pairs: &[(&str, &str)]| EntityRecord {
            id: pairs[0].1.into(),
            slots: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        };
        db.domains.insert(
            "restaurant".into(),
            vec![rec(&[
                ("name", "golden wok"),
                ("food", "thai"),
                ("area", "north"),
                ("phone", "01223 350688"),
            ])],
        );
        db.domains.insert(
            "hotel".into(),
            vec![rec(&[("name", "acorn guest house"), ("area", "east")])],
        );
        (schemas, db)
    }

    #[test]
    fn tokenize_lowercases_and_splits_punctuation() {
        assert_eq!(
            tokenize("Book the Golden Wok, please."),
            vec!["book", "the", "golden", "wok", ",", "please", "."]
        );
        assert_eq!(
            tokenize("[restaurant_name]?"),
            vec!["[restaurant_name]", "?"]
        );
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn entity_name_is_replaced() {
        let (schemas, db) = fixture();
        let d = delexicalize("book the golden wok", &db, &schemas);
        assert_eq!(d.tokens, vec!["book", "the", "[restaurant_name]"]);
        assert_eq!(
            d.placeholders.iter().collect::<Vec<_>>(),
            vec!["[restaurant_name]"]
        );
    }

    #[test]
    fn offer_slot_values_are_indexed_even_when_not_requestable() {
        let (mut schemas, db) = fixture();
        schemas[1].requestable.clear();
        let d = delexicalize("stay at acorn guest house", &db, &schemas);
        assert_eq!(d.tokens, vec!["stay", "at", "[hotel_name]"]);
        assert!(!d.matches[0].informable);
    }

    #[test]
    fn text_without_values_is_unchanged() {
        let (schemas, db) = fixture();
        let d = delexicalize("hello there how are you", &db, &schemas);
        assert_eq!(d.tokens.join(" "), "hello there how are you");
        assert!(d.placeholders.is_empty() && d.matches.is_empty());
    }

    /// All (start, length) spans of `tokens` that equal some lexicon value.
    fn brute_force_spans(tokens: &[&str], values: &[&str]) -> Vec<(usize, usize)> {
        let mut spans = Vec::new();
        for start in 0..tokens.len() {
            for v in values {
                let vt: Vec<&str> = v.split(' ').collect();
                if start + vt.len() <= tokens.len() && tokens[start..start + vt.len()] == vt[..] {
                    spans.push((start, vt.len()));
                }
            }
        }
        spans
    }

    #[test]
    fn overlapping_candidates_take_the_longest() {
        let (schemas, db) = fixture();
        let text = "i want north indian food";
        let tokens: Vec<&str> = text.split(' ').collect();
        let spans = brute_force_spans(&tokens, &["north indian", "north", "thai", "south", "east"]);
        // both "north" and "north indian" start at 2; the longest wins
        assert_eq!(spans, vec![(2, 2), (2, 1)]);
        let longest = spans.iter().max_by_key(|s| s.1).unwrap();
        let d = delexicalize(text, &db, &schemas);
        assert_eq!(d.tokens, vec!["i", "want", "[restaurant_food]", "food"]);
        assert_eq!(d.matches.len(), 1);
        assert_eq!(d.matches[0].position, longest.0);
        assert_eq!(d.matches[0].value, "north indian");
    }

    #[test]
    fn hint_breaks_cross_domain_ties() {
        let (schemas, db) = fixture();
        let lex = Delexicalizer::new(&schemas, &db);
        assert_eq!(
            lex.apply("in the north", None).tokens[2],
            "[restaurant_area]"
        );
        assert_eq!(
            lex.apply("in the north", Some("hotel")).tokens[2],
            "[hotel_area]"
        );
    }

    #[test]
    fn placeholder_parsing() {
        assert_eq!(
            parse_placeholder("[train_leave_at]"),
            Some(("train", "leave_at"))
        );
        assert_eq!(parse_placeholder("train"), None);
        assert!(!is_placeholder("[]"));
    }

    proptest! {
        #[test]
        fn delexicalization_is_idempotent(words in proptest::collection::vec(
            prop_oneof![
                Just("north"), Just("indian"), Just("golden"), Just("wok"), Just("thai"),
                Just("east"), Just("the"), Just("01223"), Just("350688"), Just("acorn"),
                Just("guest"), Just("house"), Just("food"), Just("please"),
            ],
            0..20,
        )) {
            let (schemas, db) = fixture();
            let lex = Delexicalizer::new(&schemas, &db);
            let once = lex.apply(&words.join(" "), None);
            let twice = lex.apply_tokens(&once.tokens, None);
            prop_assert_eq!(&once.tokens, &twice.tokens);
        }
    }
}
