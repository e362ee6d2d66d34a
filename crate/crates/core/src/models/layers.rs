use alloc::vec::Vec;

use super::{ModelConfig, ModelError};
use crate::corpus::EOS;
use crate::diffnum::{ParamId, ParamStore, Shape, Tape, Var};

pub(crate) fn param(store: &ParamStore, name: &str, dims: &[usize]) -> Result<ParamId, ModelError> {
    let id = store
        .find(name)
        .ok_or_else(|| ModelError::BadParameter(name.into()))?;
    if store.get(id).shape().dims() != dims {
        return Err(ModelError::BadParameter(name.into()));
    }
    Ok(id)
}

pub(crate) fn add_params<R: rand::Rng>(
    store: &mut ParamStore,
    layout: &[(alloc::string::String, Vec<usize>)],
    rng: &mut R,
) -> Result<(), ModelError> {
    for (name, dims) in layout {
        let shape = Shape::new(dims.clone())?;
        store.add_uniform(name, shape, super::INIT_SCALE, rng)?;
    }
    Ok(())
}

/// Index of the largest value; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// LSTM cell with fused gate weights `w: [4h, in + h]` in i, f, g, o order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lstm {
    pub w: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl Lstm {
    pub(crate) fn layout(
        prefix: &str,
        input: usize,
        hidden: usize,
    ) -> [(alloc::string::String, Vec<usize>); 2] {
        [
            (
                alloc::format!("{prefix}.w"),
                alloc::vec![4 * hidden, input + hidden],
            ),
            (alloc::format!("{prefix}.b"), alloc::vec![4 * hidden]),
        ]
    }

    pub(crate) fn bind(
        store: &ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
    ) -> Result<Self, ModelError> {
        let [(wn, wd), (bn, bd)] = Self::layout(prefix, input, hidden);
        Ok(Lstm {
            w: param(store, &wn, &wd)?,
            b: param(store, &bn, &bd)?,
            hidden,
        })
    }

    /// Zero hidden and cell state.
    pub fn zero_state(&self, tape: &mut Tape<'_>) -> (Var, Var) {
        let h = tape.constant_vector(&alloc::vec![0.0; self.hidden]);
        let c = tape.constant_vector(&alloc::vec![0.0; self.hidden]);
        (h, c)
    }

    /// One step; returns the new `(h, c)`.
    pub fn step(
        &self,
        tape: &mut Tape<'_>,
        x: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var), ModelError> {
        let n = self.hidden;
        let w = tape.param(self.w)?;
        let b = tape.param(self.b)?;
        let xh = tape.concat(&[x, h])?;
        let z = tape.matmul(w, xh)?;
        let z = tape.add(z, b)?;
        let i = tape.slice(z, 0, n)?;
        let i = tape.sigmoid(i)?;
        let f = tape.slice(z, n, n)?;
        let f = tape.sigmoid(f)?;
        let g = tape.slice(z, 2 * n, n)?;
        let g = tape.tanh(g)?;
        let o = tape.slice(z, 3 * n, n)?;
        let o = tape.sigmoid(o)?;
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        let c = tape.add(fc, ig)?;
        let tc = tape.tanh(c)?;
        let h = tape.mul(o, tc)?;
        Ok((h, c))
    }
}

/// Word embedding followed by an LSTM over one utterance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Encoder {
    pub emb: ParamId,
    pub lstm: Lstm,
    pub vocab: usize,
}

impl Encoder {
    pub(crate) fn layout(cfg: &ModelConfig) -> Vec<(alloc::string::String, Vec<usize>)> {
        let mut l = alloc::vec![("in_emb".into(), alloc::vec![cfg.in_vocab, cfg.embed_dim])];
        l.extend(Lstm::layout("enc", cfg.embed_dim, cfg.hidden));
        l
    }

    pub(crate) fn bind(store: &ParamStore, cfg: &ModelConfig) -> Result<Self, ModelError> {
        Ok(Encoder {
            emb: param(store, "in_emb", &[cfg.in_vocab, cfg.embed_dim])?,
            lstm: Lstm::bind(store, "enc", cfg.embed_dim, cfg.hidden)?,
            vocab: cfg.in_vocab,
        })
    }

    /// Per-token hidden states and the final one. Tokens after the first
    /// `EOS` are ignored, so padding never reaches the outputs.
    pub fn encode(&self, tape: &mut Tape<'_>, ids: &[u32]) -> Result<(Vec<Var>, Var), ModelError> {
        if ids.is_empty() {
            return Err(ModelError::Empty("utterance"));
        }
        let end = ids
            .iter()
            .position(|&t| t == EOS)
            .map_or(ids.len(), |p| p + 1);
        let table = tape.param(self.emb)?;
        let (mut h, mut c) = self.lstm.zero_state(tape);
        let mut outputs = Vec::with_capacity(end);
        for &id in &ids[..end] {
            if id as usize >= self.vocab {
                return Err(ModelError::TokenOutOfRange {
                    id,
                    size: self.vocab,
                });
            }
            let x = tape.embedding(table, id as usize)?;
            (h, c) = self.lstm.step(tape, x, h, c)?;
            outputs.push(h);
        }
        Ok((outputs, h))
    }
}

/// Forward pass of a decoder under teacher forcing.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub action: Var,
    /// One output distribution per target position.
    pub probs: Vec<Var>,
    /// Attention weights over encoder positions, one vector per step.
    pub attention: Vec<Var>,
}

/// LSTM decoder with dot-product attention. The attention context is
/// concatenated to the decoder state and mixed by a tanh layer before the
/// output projection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttnDecoder {
    pub emb: ParamId,
    pub lstm: Lstm,
    pub att_w: ParamId,
    pub att_b: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub vocab: usize,
}

struct Memory {
    keys: Var,
    keys_t: Var,
}

impl AttnDecoder {
    pub(crate) fn layout(cfg: &ModelConfig) -> Vec<(alloc::string::String, Vec<usize>)> {
        let h = cfg.hidden;
        let mut l = alloc::vec![("out_emb".into(), alloc::vec![cfg.out_vocab, cfg.embed_dim])];
        l.extend(Lstm::layout("dec", cfg.embed_dim, h));
        l.push(("att.w".into(), alloc::vec![h, 2 * h]));
        l.push(("att.b".into(), alloc::vec![h]));
        l.push(("out.w".into(), alloc::vec![cfg.out_vocab, h]));
        l.push(("out.b".into(), alloc::vec![cfg.out_vocab]));
        l
    }

    pub(crate) fn bind(store: &ParamStore, cfg: &ModelConfig) -> Result<Self, ModelError> {
        let h = cfg.hidden;
        Ok(AttnDecoder {
            emb: param(store, "out_emb", &[cfg.out_vocab, cfg.embed_dim])?,
            lstm: Lstm::bind(store, "dec", cfg.embed_dim, h)?,
            att_w: param(store, "att.w", &[h, 2 * h])?,
            att_b: param(store, "att.b", &[h])?,
            out_w: param(store, "out.w", &[cfg.out_vocab, h])?,
            out_b: param(store, "out.b", &[cfg.out_vocab])?,
            vocab: cfg.out_vocab,
        })
    }

    fn memory(tape: &mut Tape<'_>, encoder_outputs: &[Var]) -> Result<Memory, ModelError> {
        if encoder_outputs.is_empty() {
            return Err(ModelError::Empty("encoder outputs"));
        }
        let keys = tape.stack(encoder_outputs)?;
        let keys_t = tape.transpose(keys)?;
        Ok(Memory { keys, keys_t })
    }

    /// Consumes `input` and returns the distribution over the next token,
    /// the attention weights and the new state.
    fn step(
        &self,
        tape: &mut Tape<'_>,
        mem: &Memory,
        input: u32,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var, Var, Var), ModelError> {
        if input as usize >= self.vocab {
            return Err(ModelError::TokenOutOfRange {
                id: input,
                size: self.vocab,
            });
        }
        let table = tape.param(self.emb)?;
        let x = tape.embedding(table, input as usize)?;
        let (h, c) = self.lstm.step(tape, x, h, c)?;
        let scores = tape.matmul(mem.keys, h)?;
        let alpha = tape.softmax(scores)?;
        let ctx = tape.matmul(mem.keys_t, alpha)?;
        let hc = tape.concat(&[h, ctx])?;
        let aw = tape.param(self.att_w)?;
        let ab = tape.param(self.att_b)?;
        let mixed = tape.matmul(aw, hc)?;
        let mixed = tape.add(mixed, ab)?;
        let mixed = tape.tanh(mixed)?;
        let ow = tape.param(self.out_w)?;
        let ob = tape.param(self.out_b)?;
        let logits = tape.matmul(ow, mixed)?;
        let logits = tape.add(logits, ob)?;
        let probs = tape.softmax(logits)?;
        Ok((probs, alpha, h, c))
    }

    /// Teacher-forced decoding of `response` (`BOS .. EOS`): position `i`
    /// predicts `response[i + 1]` from the gold prefix.
    pub fn teacher_forced(
        &self,
        tape: &mut Tape<'_>,
        action: Var,
        encoder_outputs: &[Var],
        response: &[u32],
    ) -> Result<Decoded, ModelError> {
        if response.len() < 2 {
            return Err(ModelError::Empty("gold response"));
        }
        let mem = Self::memory(tape, encoder_outputs)?;
        let mut h = action;
        let mut c = tape.constant_vector(&alloc::vec![0.0; self.lstm.hidden]);
        let mut probs = Vec::with_capacity(response.len() - 1);
        let mut attention = Vec::with_capacity(response.len() - 1);
        for &input in &response[..response.len() - 1] {
            let (p, a, h2, c2) = self.step(tape, &mem, input, h, c)?;
            probs.push(p);
            attention.push(a);
            (h, c) = (h2, c2);
        }
        Ok(Decoded {
            action,
            probs,
            attention,
        })
    }

    /// Greedy decoding from `BOS`; emits at most `max_len` tokens and stops
    /// before `EOS`.
    pub fn greedy(
        &self,
        tape: &mut Tape<'_>,
        action: Var,
        encoder_outputs: &[Var],
        max_len: usize,
    ) -> Result<Vec<u32>, ModelError> {
        let mem = Self::memory(tape, encoder_outputs)?;
        let mut h = action;
        let mut c = tape.constant_vector(&alloc::vec![0.0; self.lstm.hidden]);
        let mut input = crate::corpus::BOS;
        let mut out = Vec::new();
        while out.len() < max_len {
            let (p, _, h2, c2) = self.step(tape, &mem, input, h, c)?;
            (h, c) = (h2, c2);
            let next = argmax(tape.value(p)?) as u32;
            if next == EOS {
                break;
            }
            out.push(next);
            input = next;
        }
        Ok(out)
    }
}
