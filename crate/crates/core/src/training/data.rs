use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::TrainError;
use crate::corpus::{build_vocab, Corpus, VocabOptions, VocabRole, Vocabulary};
use crate::models::{ModelConfig, StudentInput, TeacherInput};

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Vocabs {
    pub input: Vocabulary,
    pub output: Vocabulary,
}

impl Vocabs {
    /// Input vocabulary from user and system text, output from system text.
    pub fn build(corpus: &Corpus, options: VocabOptions) -> Result<Self, TrainError> {
        Ok(Vocabs {
            input: build_vocab(corpus, VocabRole::Input, options)?,
            output: build_vocab(corpus, VocabRole::Output, options)?,
        })
    }
}

/// One turn turned into model inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedTurn {
    pub episode: usize,
    pub turn: usize,
    /// Training bucket: a schema domain or `general`.
    pub bucket: String,
    pub teacher: TeacherInput,
    pub student: StudentInput,
    /// Gold response as output ids, `BOS .. EOS`.
    pub response: Vec<u32>,
}

/// Encodes every turn of `corpus`.
pub fn encode_corpus(corpus: &Corpus, vocabs: &Vocabs) -> Result<Vec<EncodedTurn>, TrainError> {
    let layout = corpus.layout();
    let mut out = Vec::with_capacity(corpus.turn_count());
    for (e, ep) in corpus.episodes.iter().enumerate() {
        let mut history = Vec::with_capacity(2 * ep.turns.len());
        for (t, turn) in ep.turns.iter().enumerate() {
            let user = vocabs.input.encode(turn.user.tokens());
            history.push(user.clone());
            out.push(EncodedTurn {
                episode: e,
                turn: t,
                bucket: corpus.bucket_of(&turn.domain).to_string(),
                teacher: TeacherInput {
                    utterance: user,
                    belief: layout.belief_vector(&turn.belief)?.0,
                    db: layout.db_pointer(&turn.belief, &corpus.database).0,
                },
                student: StudentInput {
                    history: history.clone(),
                },
                response: vocabs.output.encode(turn.system.tokens()),
            });
            history.push(vocabs.input.encode(turn.system.tokens()));
        }
    }
    Ok(out)
}

/// Training and validation corpora with vocabularies, model shape and
/// encoded turns.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub train: Corpus,
    pub valid: Corpus,
    pub vocabs: Vocabs,
    pub model: ModelConfig,
    pub train_turns: Vec<EncodedTurn>,
    pub valid_turns: Vec<EncodedTurn>,
}

impl Dataset {
    /// Builds vocabularies from `train` and sizes the models from them.
    pub fn new(train: Corpus, valid: Corpus, options: VocabOptions) -> Result<Self, TrainError> {
        let vocabs = Vocabs::build(&train, options)?;
        let layout = train.layout();
        let model = ModelConfig::new(
            vocabs.input.len(),
            vocabs.output.len(),
            layout.belief_dim(),
            layout.db_dim(),
        );
        Self::with_vocabs(train, valid, vocabs, model)
    }

    pub fn with_vocabs(
        train: Corpus,
        valid: Corpus,
        vocabs: Vocabs,
        model: ModelConfig,
    ) -> Result<Self, TrainError> {
        if train.turn_count() == 0 {
            return Err(TrainError::EmptyCorpus);
        }
        if model.in_vocab != vocabs.input.len() || model.out_vocab != vocabs.output.len() {
            return Err(TrainError::Config(
                "model config does not match the vocabularies".into(),
            ));
        }
        let train_turns = encode_corpus(&train, &vocabs)?;
        let valid_turns = encode_corpus(&valid, &vocabs)?;
        Ok(Dataset {
            train,
            valid,
            vocabs,
            model,
            train_turns,
            valid_turns,
        })
    }

    /// Same data, different layer sizes.
    pub fn with_dims(mut self, embed_dim: usize, hidden: usize) -> Self {
        self.model.embed_dim = embed_dim;
        self.model.hidden = hidden;
        self
    }

    /// Buckets present in the training set or declared by the schemas.
    pub fn buckets(&self) -> Vec<String> {
        let mut b: Vec<String> = self.train.domain_names().map(String::from).collect();
        b.push(crate::GENERAL_DOMAIN.to_string());
        b
    }
}
