use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::MetricError;
use crate::corpus::{placeholder, placeholders_in, Corpus, Episode};

/// Share of the gold placeholders that the generated response also
/// contains; `None` when the gold response has none.
pub fn entity_recall<G: AsRef<str>, R: AsRef<str>>(generated: &[G], gold: &[R]) -> Option<f64> {
    let gold = placeholders_in(gold);
    if gold.is_empty() {
        return None;
    }
    let got = placeholders_in(generated);
    Some(gold.intersection(&got).count() as f64 / gold.len() as f64)
}

/// Mean over the pairs whose recall is defined, with their count.
pub fn mean_entity_recall<G: AsRef<[String]>, R: AsRef<[String]>>(
    generated: &[G],
    gold: &[R],
) -> (Option<f64>, usize) {
    let scores: Vec<f64> = generated
        .iter()
        .zip(gold)
        .filter_map(|(g, r)| entity_recall(g.as_ref(), r.as_ref()))
        .collect();
    if scores.is_empty() {
        (None, 0)
    } else {
        (
            Some(scores.iter().sum::<f64>() / scores.len() as f64),
            scores.len(),
        )
    }
}

/// Inform and success of one episode, overall and per goal domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeOutcome {
    pub inform: bool,
    pub success: bool,
    pub domains: BTreeMap<String, (bool, bool)>,
}

/// Judges one episode's responses (one per turn) against its goal.
///
/// A domain that needs an offer is informed when some response contains its
/// offer placeholder and the database has an entity matching the goal
/// constraints. It succeeds when it is informed and every requested slot's
/// placeholder appears in a response of a turn tagged with that domain. The
/// episode needs every domain to pass.
pub fn episode_outcome<S: AsRef<str>>(
    corpus: &Corpus,
    episode: &Episode,
    responses: &[Vec<S>],
) -> Result<EpisodeOutcome, MetricError> {
    if responses.len() != episode.turns.len() {
        return Err(MetricError::CountMismatch {
            what: "episode responses",
            expected: episode.turns.len(),
            got: responses.len(),
        });
    }
    let all = responses
        .iter()
        .flat_map(|r| placeholders_in(r))
        .collect::<alloc::collections::BTreeSet<_>>();
    let mut out = EpisodeOutcome {
        inform: true,
        success: true,
        domains: BTreeMap::new(),
    };
    for (domain, goal) in &episode.goal {
        let schema = corpus
            .schema(domain)
            .ok_or_else(|| MetricError::UnknownDomain(domain.clone()))?;
        let inform = !goal.offer
            || (all.contains(&placeholder(domain, schema.offer_slot()))
                && corpus.database.count(domain, &goal.constraints) > 0);
        let in_domain = episode
            .turns
            .iter()
            .zip(responses)
            .filter(|(t, _)| &t.domain == domain)
            .flat_map(|(_, r)| placeholders_in(r))
            .collect::<alloc::collections::BTreeSet<_>>();
        let success = inform
            && goal
                .requested
                .iter()
                .all(|slot| in_domain.contains(&placeholder(domain, slot)));
        out.inform &= inform;
        out.success &= success;
        out.domains.insert(domain.clone(), (inform, success));
    }
    Ok(out)
}

/// Episode-mean inform and success rates.
pub fn inform_success<S: AsRef<str>>(
    corpus: &Corpus,
    responses: &[Vec<Vec<S>>],
) -> Result<(f64, f64), MetricError> {
    if corpus.episodes.is_empty() {
        return Err(MetricError::Empty);
    }
    if responses.len() != corpus.episodes.len() {
        return Err(MetricError::CountMismatch {
            what: "episodes",
            expected: corpus.episodes.len(),
            got: responses.len(),
        });
    }
    let (mut inform, mut success) = (0usize, 0usize);
    for (ep, r) in corpus.episodes.iter().zip(responses) {
        let o = episode_outcome(corpus, ep, r)?;
        inform += o.inform as usize;
        success += o.success as usize;
    }
    let n = corpus.episodes.len() as f64;
    Ok((inform as f64 / n, success as f64 / n))
}
