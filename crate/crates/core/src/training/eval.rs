use alloc::string::String;
use alloc::vec::Vec;

use super::{EncodedTurn, TrainError};
use crate::corpus::{Corpus, Vocabulary};
use crate::diffnum::Tape;
use crate::metrics::{entity_recall, ngram_stats, BleuStats, Responses};
use crate::models::{argmax, ModelError, StudentModel, TeacherModel};

/// A model that answers encoded turns.
pub trait ResponseModel {
    /// Greedy response ids, without `BOS`/`EOS`.
    fn respond(&self, turn: &EncodedTurn, max_len: usize) -> Result<Vec<u32>, ModelError>;

    /// Argmax prediction at every position under teacher forcing.
    fn forced_predictions(&self, turn: &EncodedTurn) -> Result<Vec<u32>, ModelError>;
}

impl ResponseModel for TeacherModel {
    fn respond(&self, turn: &EncodedTurn, max_len: usize) -> Result<Vec<u32>, ModelError> {
        self.generate(&turn.teacher, max_len)
    }

    fn forced_predictions(&self, turn: &EncodedTurn) -> Result<Vec<u32>, ModelError> {
        let mut tape = Tape::inference(&self.params);
        let d = self.forward(&mut tape, &turn.teacher, &turn.response)?;
        d.probs
            .iter()
            .map(|p| Ok(argmax(tape.value(*p)?) as u32))
            .collect()
    }
}

impl ResponseModel for StudentModel {
    fn respond(&self, turn: &EncodedTurn, max_len: usize) -> Result<Vec<u32>, ModelError> {
        self.generate(&turn.student, max_len)
    }

    fn forced_predictions(&self, turn: &EncodedTurn) -> Result<Vec<u32>, ModelError> {
        let mut tape = Tape::inference(&self.params);
        let d = self.forward(&mut tape, &turn.student, &turn.response)?;
        d.probs
            .iter()
            .map(|p| Ok(argmax(tape.value(*p)?) as u32))
            .collect()
    }
}

/// Share of gold positions (including `EOS`) predicted exactly under
/// teacher forcing.
pub fn teacher_forced_accuracy<M: ResponseModel>(
    model: &M,
    turns: &[EncodedTurn],
) -> Result<f64, TrainError> {
    let (mut hit, mut total) = (0usize, 0usize);
    for t in turns {
        let pred = model.forced_predictions(t)?;
        for (p, g) in pred.iter().zip(&t.response[1..]) {
            hit += (p == g) as usize;
            total += 1;
        }
    }
    if total == 0 {
        return Err(TrainError::EmptyCorpus);
    }
    Ok(hit as f64 / total as f64)
}

/// Generated responses for every turn of `corpus`, in corpus order.
/// `turns` must be the encoding of `corpus`.
pub fn generate_responses<M: ResponseModel>(
    model: &M,
    corpus: &Corpus,
    turns: &[EncodedTurn],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Responses, TrainError> {
    let mut out: Responses = corpus
        .episodes
        .iter()
        .map(|e| Vec::with_capacity(e.turns.len()))
        .collect();
    for t in turns {
        let ids = model.respond(t, max_len)?;
        let slot = out.get_mut(t.episode).ok_or(TrainError::LengthMismatch {
            expected: corpus.episodes.len(),
            got: t.episode + 1,
        })?;
        slot.push(vocab.decode(&ids));
    }
    for (e, r) in corpus.episodes.iter().zip(&out) {
        if e.turns.len() != r.len() {
            return Err(TrainError::LengthMismatch {
                expected: e.turns.len(),
                got: r.len(),
            });
        }
    }
    Ok(out)
}

/// Turn-level BLEU and entity recall over a subset of turns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TurnScores {
    pub turns: usize,
    pub bleu4: f64,
    pub entity_recall: Option<f64>,
}

pub fn score_turns<M: ResponseModel>(
    model: &M,
    corpus: &Corpus,
    turns: &[&EncodedTurn],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<TurnScores, TrainError> {
    let mut bleu = BleuStats::default();
    let (mut er_sum, mut er_n) = (0.0, 0usize);
    for t in turns {
        let generated: Vec<String> = vocab.decode(&model.respond(t, max_len)?);
        let gold = corpus.episodes[t.episode].turns[t.turn].system.tokens();
        bleu.add(&ngram_stats(&generated, gold));
        if let Some(r) = entity_recall(&generated, gold) {
            er_sum += r;
            er_n += 1;
        }
    }
    Ok(TurnScores {
        turns: turns.len(),
        bleu4: bleu.score(),
        entity_recall: (er_n > 0).then(|| er_sum / er_n as f64),
    })
}
