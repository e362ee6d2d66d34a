use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;

const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VocabRole {
    /// Encoder side: user and system utterances.
    Input,
    /// Decoder side: system responses.
    Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabOptions {
    /// Input vocabulary: minimum token frequency.
    pub min_count: usize,
    /// Output vocabulary: maximum size including reserved tokens.
    pub max_size: usize,
}

impl Default for VocabOptions {
    fn default() -> Self {
        VocabOptions {
            min_count: 5,
            max_size: 500,
        }
    }
}

/// Token to id map with `<pad> <bos> <eos> <unk>` at ids 0 to 3.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabFile", into = "VocabFile")]
pub struct Vocabulary {
    role: VocabRole,
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    role: VocabRole,
    tokens: Vec<String>,
}

impl TryFrom<VocabFile> for Vocabulary {
    type Error = CorpusError;

    fn try_from(f: VocabFile) -> Result<Self, CorpusError> {
        Vocabulary::from_tokens(f.role, f.tokens)
    }
}

impl From<Vocabulary> for VocabFile {
    fn from(v: Vocabulary) -> Self {
        VocabFile {
            role: v.role,
            tokens: v.tokens,
        }
    }
}

impl Vocabulary {
    /// Builds from the full id-ordered token list, reserved tokens included.
    pub fn from_tokens(role: VocabRole, tokens: Vec<String>) -> Result<Self, CorpusError> {
        if tokens.len() < RESERVED.len() || tokens.iter().zip(RESERVED).any(|(a, b)| a != b) {
            return Err(CorpusError::Invalid(
                "vocabulary must start with the reserved tokens".into(),
            ));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(CorpusError::Invalid(alloc::format!(
                    "duplicate vocabulary token {t}"
                )));
            }
        }
        Ok(Vocabulary {
            role,
            tokens,
            index,
        })
    }

    fn from_ranked(role: VocabRole, ranked: impl Iterator<Item = String>) -> Self {
        let tokens = RESERVED
            .iter()
            .map(|t| t.to_string())
            .chain(ranked)
            .collect();
        Vocabulary::from_tokens(role, tokens).expect("ranked tokens are unique and non-reserved")
    }

    pub fn role(&self) -> VocabRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// `BOS`, the token ids (`UNK` when out of vocabulary), `EOS`.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(BOS);
        ids.extend(tokens.iter().map(|t| self.id(t.as_ref())));
        ids.push(EOS);
        ids
    }

    /// Tokens up to the first `EOS`, skipping `BOS` and `PAD`.
    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .filter(|&&id| id != BOS && id != PAD)
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK as usize]).to_string())
            .collect()
    }
}

/// Frequency-based vocabulary; ties are broken lexicographically.
pub fn build_vocab(
    corpus: &Corpus,
    role: VocabRole,
    options: VocabOptions,
) -> Result<Vocabulary, CorpusError> {
    if corpus.turn_count() == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for turn in corpus.episodes.iter().flat_map(|e| &e.turns) {
        let sources: &[&[String]] = match role {
            VocabRole::Input => &[turn.user.tokens(), turn.system.tokens()],
            VocabRole::Output => &[turn.system.tokens()],
        };
        for tok in sources.iter().flat_map(|s| s.iter()) {
            if !RESERVED.contains(&tok.as_str()) {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let kept: Vec<String> = match role {
        VocabRole::Input => ranked
            .into_iter()
            .filter(|&(_, c)| c >= options.min_count)
            .map(|(t, _)| t.to_string())
            .collect(),
        VocabRole::Output => ranked
            .into_iter()
            .take(options.max_size.saturating_sub(RESERVED.len()))
            .map(|(t, _)| t.to_string())
            .collect(),
    };
    Ok(Vocabulary::from_ranked(role, kept.into_iter()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Database, Episode, Goal, Turn, Utterance};
    use alloc::vec;
    use proptest::prelude::*;

    fn corpus_of(lines: &[(&str, &str)]) -> Corpus {
        Corpus {
            schemas: vec![],
            database: Database::default(),
            episodes: vec![Episode {
                id: "e".into(),
                goal: Goal::new(),
                turns: lines
                    .iter()
                    .map(|(u, s)| Turn {
                        user: Utterance::parse(u),
                        system: Utterance::parse(s),
                        domain: "general".into(),
                        belief: Default::default(),
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn rare_tokens_drop_out_of_input_vocab() {
        let c = corpus_of(&[("a a a a b", "a"), ("b b b b", "c")]);
        let v = build_vocab(&c, VocabRole::Input, VocabOptions::default()).unwrap();
        assert!(v.contains("a") && v.contains("b"));
        // "c" appears once
        assert!(!v.contains("c"));
        assert_eq!(v.encode(&["c"]), vec![BOS, UNK, EOS]);
    }

    #[test]
    fn token_seen_four_times_maps_to_unk() {
        let c = corpus_of(&[("x x x x", "y y y y y")]);
        let v = build_vocab(&c, VocabRole::Input, VocabOptions::default()).unwrap();
        assert_eq!(v.id("x"), UNK);
        assert_ne!(v.id("y"), UNK);
    }

    #[test]
    fn output_vocab_is_capped_with_lexicographic_ties() {
        let c = corpus_of(&[("", "d c b a a")]);
        let opts = VocabOptions {
            min_count: 5,
            max_size: 6,
        };
        let v = build_vocab(&c, VocabRole::Output, opts).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(&v.tokens()[4..], &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn reserved_tokens_always_present() {
        let c = corpus_of(&[("hi", "hello")]);
        for role in [VocabRole::Input, VocabRole::Output] {
            let v = build_vocab(&c, role, VocabOptions::default()).unwrap();
            assert_eq!(v.token(PAD), Some("<pad>"));
            assert_eq!(v.token(BOS), Some("<bos>"));
            assert_eq!(v.token(EOS), Some("<eos>"));
            assert_eq!(v.token(UNK), Some("<unk>"));
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let c = corpus_of(&[]);
        assert_eq!(
            build_vocab(&c, VocabRole::Input, VocabOptions::default()).unwrap_err(),
            CorpusError::EmptyCorpus
        );
    }

    #[test]
    fn encode_empty_utterance() {
        let c = corpus_of(&[("hi", "hello")]);
        let v = build_vocab(&c, VocabRole::Output, VocabOptions::default()).unwrap();
        assert_eq!(v.encode::<&str>(&[]), vec![BOS, EOS]);
    }

    #[test]
    fn serde_round_trip() {
        let c = corpus_of(&[("hi", "hello there")]);
        let v = build_vocab(&c, VocabRole::Output, VocabOptions::default()).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }

    proptest! {
        #[test]
        fn output_vocab_never_exceeds_500_and_round_trips(
            sentences in proptest::collection::vec(proptest::collection::vec("[a-z]{1,3}", 1..12), 1..40)
        ) {
            let lines: Vec<String> = sentences.iter().map(|s| s.join(" ")).collect();
            let pairs: Vec<(&str, &str)> = lines.iter().map(|l| ("u", l.as_str())).collect();
            let c = corpus_of(&pairs);
            let v = build_vocab(&c, VocabRole::Output, VocabOptions::default()).unwrap();
            prop_assert!(v.len() <= 500);
            for s in &sentences {
                if s.iter().all(|t| v.contains(t)) {
                    let ids = v.encode(s);
                    prop_assert_eq!(ids.len(), s.len() + 2);
                    prop_assert_eq!(&v.decode(&ids), s);
                }
            }
        }
    }
}
