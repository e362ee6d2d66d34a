use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{add_params, param};
use super::{AttnDecoder, Decoded, Encoder, ModelConfig, ModelError};
use crate::diffnum::{ParamId, ParamStore, Tape, Var};

/// Teacher inputs for one turn: the current user utterance and the oracle
/// dialogue state.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherInput {
    /// `BOS .. EOS` input-vocabulary ids.
    pub utterance: Vec<u32>,
    pub belief: Vec<f64>,
    pub db: Vec<f64>,
}

/// Seq2seq model whose decoder starts from
/// `a = tanh(W [v_u; v_b; v_kb])`.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherModel {
    pub config: ModelConfig,
    pub params: ParamStore,
    /// Domain the teacher was fine-tuned on; `None` for the universal one.
    pub domain: Option<String>,
    encoder: Encoder,
    policy: ParamId,
    decoder: AttnDecoder,
}

impl TeacherModel {
    fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
        let mut l = Encoder::layout(cfg);
        l.push((
            "policy.w".into(),
            alloc::vec![cfg.hidden, cfg.hidden + cfg.belief_dim + cfg.db_dim],
        ));
        l.extend(AttnDecoder::layout(cfg));
        l
    }

    /// Fresh model with parameters drawn from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        add_params(&mut store, &Self::layout(&config), &mut rng)?;
        Self::from_params(config, store, None)
    }

    /// Wraps an existing store, checking every parameter name and shape.
    pub fn from_params(
        config: ModelConfig,
        params: ParamStore,
        domain: Option<String>,
    ) -> Result<Self, ModelError> {
        let layout = Self::layout(&config);
        if params.len() != layout.len() {
            return Err(ModelError::BadParameter(alloc::format!(
                "expected {} tensors, found {}",
                layout.len(),
                params.len()
            )));
        }
        let encoder = Encoder::bind(&params, &config)?;
        let policy = param(&params, "policy.w", &layout[3].1)?;
        let decoder = AttnDecoder::bind(&params, &config)?;
        Ok(TeacherModel {
            config,
            params,
            domain,
            encoder,
            policy,
            decoder,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn decoder(&self) -> &AttnDecoder {
        &self.decoder
    }

    pub fn policy_weight(&self) -> ParamId {
        self.policy
    }

    /// Encoder outputs and `v_u` for an utterance.
    pub fn encode_utterance(
        &self,
        tape: &mut Tape<'_>,
        ids: &[u32],
    ) -> Result<(Vec<Var>, Var), ModelError> {
        self.encoder.encode(tape, ids)
    }

    /// `tanh(W [v_u; v_b; v_kb])`, no bias.
    pub fn action(
        &self,
        tape: &mut Tape<'_>,
        v_u: Var,
        belief: &[f64],
        db: &[f64],
    ) -> Result<Var, ModelError> {
        check_dim("belief vector", self.config.belief_dim, belief.len())?;
        check_dim("db pointer", self.config.db_dim, db.len())?;
        let w = tape.param(self.policy)?;
        teacher_action(tape, v_u, belief, db, w)
    }

    /// Teacher-forced forward pass over `response` (`BOS .. EOS`, output ids).
    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        input: &TeacherInput,
        response: &[u32],
    ) -> Result<Decoded, ModelError> {
        let (outputs, v_u) = self.encode_utterance(tape, &input.utterance)?;
        let action = self.action(tape, v_u, &input.belief, &input.db)?;
        self.decoder
            .teacher_forced(tape, action, &outputs, response)
    }

    /// Greedy response, without `BOS`/`EOS`.
    pub fn generate(&self, input: &TeacherInput, max_len: usize) -> Result<Vec<u32>, ModelError> {
        let mut tape = Tape::inference(&self.params);
        let (outputs, v_u) = self.encode_utterance(&mut tape, &input.utterance)?;
        let action = self.action(&mut tape, v_u, &input.belief, &input.db)?;
        self.decoder.greedy(&mut tape, action, &outputs, max_len)
    }
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected != got {
        return Err(ModelError::DimMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// `tanh(w · [v_u; v_b; v_kb])` for an arbitrary weight variable.
pub fn teacher_action(
    tape: &mut Tape<'_>,
    v_u: Var,
    belief: &[f64],
    db: &[f64],
    w: Var,
) -> Result<Var, ModelError> {
    let vb = tape.constant_vector(belief);
    let vkb = tape.constant_vector(db);
    let x = tape.concat(&[v_u, vb, vkb])?;
    let cols = tape.shape(w)?.dims().get(1).copied().unwrap_or(0);
    check_dim("policy input", cols, tape.shape(x)?.numel())?;
    let z = tape.matmul(w, x)?;
    Ok(tape.tanh(z)?)
}
