use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::add_params;
use super::{AttnDecoder, Decoded, Encoder, Lstm, ModelConfig, ModelError};
use crate::diffnum::{ParamStore, Tape, Var};

/// Student inputs for one turn: every utterance so far, alternating user and
/// system, ending with the current user utterance. All ids are from the
/// input vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct StudentInput {
    pub history: Vec<Vec<u32>>,
}

/// Hierarchical encoder-decoder: a word-level encoder per utterance, a
/// context LSTM over the utterance vectors whose final state is the action,
/// and the attention decoder over the current user utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct StudentModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    encoder: Encoder,
    context: Lstm,
    decoder: AttnDecoder,
}

impl StudentModel {
    fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
        let mut l = Encoder::layout(cfg);
        l.extend(Lstm::layout("ctx", cfg.hidden, cfg.hidden));
        l.extend(AttnDecoder::layout(cfg));
        l
    }

    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        add_params(&mut store, &Self::layout(&config), &mut rng)?;
        Self::from_params(config, store)
    }

    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self, ModelError> {
        let expected = Self::layout(&config).len();
        if params.len() != expected {
            return Err(ModelError::BadParameter(alloc::format!(
                "expected {expected} tensors, found {}",
                params.len()
            )));
        }
        let encoder = Encoder::bind(&params, &config)?;
        let context = Lstm::bind(&params, "ctx", config.hidden, config.hidden)?;
        let decoder = AttnDecoder::bind(&params, &config)?;
        Ok(StudentModel {
            config,
            params,
            encoder,
            context,
            decoder,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn decoder(&self) -> &AttnDecoder {
        &self.decoder
    }

    pub fn encode_utterance(
        &self,
        tape: &mut Tape<'_>,
        ids: &[u32],
    ) -> Result<(Vec<Var>, Var), ModelError> {
        self.encoder.encode(tape, ids)
    }

    /// Final hidden state of the context LSTM run from a zero state.
    pub fn action(
        &self,
        tape: &mut Tape<'_>,
        utterance_vectors: &[Var],
    ) -> Result<Var, ModelError> {
        if utterance_vectors.is_empty() {
            return Err(ModelError::Empty("dialogue history"));
        }
        let (mut h, mut c) = self.context.zero_state(tape);
        for &v in utterance_vectors {
            (h, c) = self.context.step(tape, v, h, c)?;
        }
        Ok(h)
    }

    /// Encodes the history and returns the current utterance's encoder
    /// outputs with the action.
    fn encode_history(
        &self,
        tape: &mut Tape<'_>,
        input: &StudentInput,
    ) -> Result<(Vec<Var>, Var), ModelError> {
        if input.history.is_empty() {
            return Err(ModelError::Empty("dialogue history"));
        }
        let mut vectors = Vec::with_capacity(input.history.len());
        let mut last = Vec::new();
        for utt in &input.history {
            let (outputs, v) = self.encode_utterance(tape, utt)?;
            vectors.push(v);
            last = outputs;
        }
        let action = self.action(tape, &vectors)?;
        Ok((last, action))
    }

    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        input: &StudentInput,
        response: &[u32],
    ) -> Result<Decoded, ModelError> {
        let (outputs, action) = self.encode_history(tape, input)?;
        self.decoder
            .teacher_forced(tape, action, &outputs, response)
    }

    pub fn generate(&self, input: &StudentInput, max_len: usize) -> Result<Vec<u32>, ModelError> {
        let mut tape = Tape::inference(&self.params);
        let (outputs, action) = self.encode_history(&mut tape, input)?;
        self.decoder.greedy(&mut tape, action, &outputs, max_len)
    }
}
