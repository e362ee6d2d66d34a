use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::MetricError;
use crate::math;

/// Sufficient statistics of corpus BLEU-4.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BleuStats {
    /// Clipped n-gram matches for n = 1..4.
    pub matches: [usize; 4],
    /// Candidate n-gram totals for n = 1..4.
    pub totals: [usize; 4],
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl BleuStats {
    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..4 {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.candidate_len += other.candidate_len;
        self.reference_len += other.reference_len;
    }

    /// Score in `[0, 100]`; zero as soon as one precision is zero.
    pub fn score(&self) -> f64 {
        if self.candidate_len == 0 || self.matches.contains(&0) {
            return 0.0;
        }
        let log_p: f64 = (0..4)
            .map(|n| math::ln(self.matches[n] as f64 / self.totals[n] as f64))
            .sum::<f64>()
            / 4.0;
        let (c, r) = (self.candidate_len as f64, self.reference_len as f64);
        let bp = if c > r { 1.0 } else { math::exp(1.0 - r / c) };
        100.0 * bp * math::exp(log_p)
    }
}

fn counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut m = BTreeMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

fn lower(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

/// Statistics for one candidate/reference pair, compared case-insensitively.
pub fn ngram_stats(candidate: &[String], reference: &[String]) -> BleuStats {
    let (cand, refr) = (lower(candidate), lower(reference));
    let mut s = BleuStats {
        candidate_len: cand.len(),
        reference_len: refr.len(),
        ..BleuStats::default()
    };
    for n in 1..=4 {
        let rc = counts(&refr, n);
        for (gram, c) in counts(&cand, n) {
            s.matches[n - 1] += c.min(rc.get(gram).copied().unwrap_or(0));
            s.totals[n - 1] += c;
        }
    }
    s
}

/// Corpus-level BLEU-4 with brevity penalty and no smoothing, scaled to 100.
pub fn bleu4<C: AsRef<[String]>, R: AsRef<[String]>>(
    candidates: &[C],
    references: &[R],
) -> Result<f64, MetricError> {
    if candidates.is_empty() {
        return Err(MetricError::Empty);
    }
    if candidates.len() != references.len() {
        return Err(MetricError::CountMismatch {
            what: "bleu references",
            expected: candidates.len(),
            got: references.len(),
        });
    }
    let mut total = BleuStats::default();
    for (c, r) in candidates.iter().zip(references) {
        total.add(&ngram_stats(c.as_ref(), r.as_ref()));
    }
    Ok(total.score())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identical_corpus_scores_100() {
        let c = vec![
            toks("the hotel is in the north"),
            toks("it has free parking and wifi"),
        ];
        assert!((bleu4(&c, &c).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn no_four_gram_overlap_scores_zero() {
        let c = vec![toks("a b c d e")];
        let r = vec![toks("a b c x d e")];
        assert_eq!(bleu4(&c, &r).unwrap(), 0.0);
    }

    #[test]
    fn case_is_ignored() {
        let c = vec![toks("The Hotel Is Nice Today")];
        let r = vec![toks("the hotel is nice today")];
        assert!((bleu4(&c, &r).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn short_candidate_is_penalized() {
        let c = vec![toks("a b c d")];
        let r = vec![toks("a b c d e f g h")];
        let expected = 100.0 * libm::exp(1.0 - 2.0);
        assert!((bleu4(&c, &r).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn clipping_limits_repeated_tokens() {
        let s = ngram_stats(&toks("the the the the"), &toks("the cat"));
        assert_eq!(s.matches[0], 1);
        assert_eq!(s.totals[0], 4);
    }

    #[test]
    fn errors() {
        let empty: Vec<Vec<String>> = vec![];
        assert_eq!(bleu4(&empty, &empty), Err(MetricError::Empty));
        assert!(matches!(
            bleu4(&[toks("a")], &[toks("a"), toks("b")]),
            Err(MetricError::CountMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_bounded(
            pairs in proptest::collection::vec(
                (proptest::collection::vec("[abc]", 1..8), proptest::collection::vec("[abc]", 1..8)),
                1..10,
            ),
            rot in 0usize..10,
        ) {
            let (c, r): (Vec<Vec<String>>, Vec<Vec<String>>) = pairs.iter().cloned().unzip();
            let a = bleu4(&c, &r).unwrap();
            let k = rot % c.len();
            let (mut c2, mut r2) = (c.clone(), r.clone());
            c2.rotate_left(k);
            r2.rotate_left(k);
            prop_assert_eq!(a, bleu4(&c2, &r2).unwrap());
            prop_assert!((0.0..=100.0 + 1e-9).contains(&a));
        }
    }
}
