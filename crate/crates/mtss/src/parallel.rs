//! Worker-pool response generation with deterministic ordering.

use std::num::NonZeroUsize;
use std::thread;

use mtss_core::corpus::{Corpus, Vocabulary};
use mtss_core::metrics::Responses;
use mtss_core::training::{EncodedTurn, ResponseModel, TrainError};

pub const THREADS_VAR: &str = "MTSS_THREADS";

/// `MTSS_THREADS` if set to a positive integer, else the available
/// parallelism.
pub fn worker_count() -> usize {
    parse_threads(std::env::var(THREADS_VAR).ok().as_deref())
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, NonZeroUsize::get))
}

fn parse_threads(v: Option<&str>) -> Option<usize> {
    v.and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `f` over `items` on up to `threads` scoped workers; results come
/// back in input order.
pub fn map_ordered<T, R, E, F>(items: &[T], threads: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Result<Vec<R>, E>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("worker panicked")?);
        }
        Ok(out)
    })
}

/// Same result as [`mtss_core::training::generate_responses`], computed on
/// `threads` workers.
pub fn generate_parallel<M: ResponseModel + Sync>(
    model: &M,
    corpus: &Corpus,
    turns: &[EncodedTurn],
    vocab: &Vocabulary,
    max_len: usize,
    threads: usize,
) -> Result<Responses, TrainError> {
    let decoded = map_ordered(turns, threads, |t| {
        Ok::<_, TrainError>(vocab.decode(&model.respond(t, max_len)?))
    })?;
    let mut out: Responses = corpus
        .episodes
        .iter()
        .map(|e| Vec::with_capacity(e.turns.len()))
        .collect();
    for (t, r) in turns.iter().zip(decoded) {
        out.get_mut(t.episode)
            .ok_or(TrainError::LengthMismatch {
                expected: corpus.episodes.len(),
                got: t.episode + 1,
            })?
            .push(r);
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
