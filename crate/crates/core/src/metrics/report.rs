use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{episode_outcome, ngram_stats, BleuStats, MetricError};
use crate::corpus::Corpus;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainScores {
    /// Turns tagged with the domain.
    pub turns: usize,
    /// Episodes whose goal includes the domain.
    pub episodes: usize,
    pub bleu4: Option<f64>,
    pub entity_recall: Option<f64>,
    pub inform: Option<f64>,
    pub success: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu4: f64,
    pub inform: f64,
    pub success: f64,
    /// Mean over turns whose gold response has placeholders; 0 if none do.
    pub entity_recall: f64,
    pub entity_turns: usize,
    pub episodes: usize,
    pub turns: usize,
    pub domains: BTreeMap<String, DomainScores>,
}

#[derive(Default)]
struct Acc {
    turns: usize,
    bleu: BleuStats,
    er_sum: f64,
    er_n: usize,
    episodes: usize,
    inform: usize,
    success: usize,
}

/// Scores generated responses (indexed `[episode][turn]`) against a corpus.
pub fn evaluate<S: AsRef<str>>(
    corpus: &Corpus,
    responses: &[Vec<Vec<S>>],
) -> Result<MetricReport, MetricError> {
    if corpus.turn_count() == 0 {
        return Err(MetricError::Empty);
    }
    if responses.len() != corpus.episodes.len() {
        return Err(MetricError::CountMismatch {
            what: "episodes",
            expected: corpus.episodes.len(),
            got: responses.len(),
        });
    }
    let mut total = Acc::default();
    let mut per: BTreeMap<String, Acc> = BTreeMap::new();
    for (ep, resp) in corpus.episodes.iter().zip(responses) {
        let outcome = episode_outcome(corpus, ep, resp)?;
        total.episodes += 1;
        total.inform += outcome.inform as usize;
        total.success += outcome.success as usize;
        for (d, (i, s)) in &outcome.domains {
            let a = per.entry(d.clone()).or_default();
            a.episodes += 1;
            a.inform += *i as usize;
            a.success += *s as usize;
        }
        for (turn, r) in ep.turns.iter().zip(resp) {
            let generated: Vec<String> = r.iter().map(|t| t.as_ref().to_string()).collect();
            let stats = ngram_stats(&generated, turn.system.tokens());
            let er = super::entity_recall(&generated, turn.system.tokens());
            let a = per
                .entry(corpus.bucket_of(&turn.domain).to_string())
                .or_default();
            for acc in [&mut total, a] {
                acc.turns += 1;
                acc.bleu.add(&stats);
                if let Some(x) = er {
                    acc.er_sum += x;
                    acc.er_n += 1;
                }
            }
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let domains = per
        .into_iter()
        .map(|(d, a)| {
            let scores = DomainScores {
                turns: a.turns,
                episodes: a.episodes,
                bleu4: (a.turns > 0).then(|| a.bleu.score()),
                entity_recall: (a.er_n > 0).then(|| a.er_sum / a.er_n as f64),
                inform: ratio(a.inform, a.episodes),
                success: ratio(a.success, a.episodes),
            };
            (d, scores)
        })
        .collect();
    Ok(MetricReport {
        bleu4: total.bleu.score(),
        inform: total.inform as f64 / total.episodes as f64,
        success: total.success as f64 / total.episodes as f64,
        entity_recall: if total.er_n > 0 {
            total.er_sum / total.er_n as f64
        } else {
            0.0
        },
        entity_turns: total.er_n,
        episodes: total.episodes,
        turns: total.turns,
        domains,
    })
}

/// Gold system responses in the layout [`evaluate`] expects.
pub fn gold_responses(corpus: &Corpus) -> Vec<Vec<Vec<String>>> {
    corpus
        .episodes
        .iter()
        .map(|e| e.turns.iter().map(|t| t.system.tokens().to_vec()).collect())
        .collect()
}
