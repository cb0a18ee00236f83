//! Token error rate by minimum-edit alignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WerReport {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub n_ref_words: usize,
    pub wer_percent: f64,
}

impl WerReport {
    pub fn from_counts(s: usize, d: usize, i: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::UndefinedWer);
        }
        Ok(Self {
            substitutions: s,
            deletions: d,
            insertions: i,
            n_ref_words: n,
            wer_percent: 100.0 * (s + d + i) as f64 / n as f64,
        })
    }

    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// Pools counts over utterances.
    pub fn combine(reports: &[WerReport]) -> Result<Self> {
        let sum = |f: fn(&WerReport) -> usize| reports.iter().map(f).sum::<usize>();
        Self::from_counts(
            sum(|r| r.substitutions),
            sum(|r| r.deletions),
            sum(|r| r.insertions),
            sum(|r| r.n_ref_words),
        )
    }
}

/// Unit-cost alignment. Among the alignments with the fewest edits the one
/// with the most substitutions (fewest deletions + insertions) is reported,
/// which makes the counts unique and mirror-symmetric under swapping
/// reference and hypothesis.
pub fn levenshtein_wer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<WerReport> {
    if reference.is_empty() {
        return Err(Error::UndefinedWer);
    }
    let (n, m) = (reference.len(), hypothesis.len());
    // cell = (edits, substitutions, deletions); insertions follow
    let mut prev: Vec<(usize, usize, usize)> = (0..=m).map(|j| (j, 0, 0)).collect();
    let mut cur = vec![(0, 0, 0); m + 1];
    let better = |a: (usize, usize, usize), b: (usize, usize, usize)| {
        a.0 < b.0 || (a.0 == b.0 && a.1 > b.1)
    };
    for i in 1..=n {
        cur[0] = (i, 0, i);
        for j in 1..=m {
            let (e, s, d) = prev[j - 1];
            let mut best = if reference[i - 1] == hypothesis[j - 1] {
                (e, s, d)
            } else {
                (e + 1, s + 1, d)
            };
            let (e, s, d) = prev[j];
            let del = (e + 1, s, d + 1);
            if better(del, best) {
                best = del;
            }
            let (e, s, d) = cur[j - 1];
            let ins = (e + 1, s, d);
            if better(ins, best) {
                best = ins;
            }
            cur[j] = best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (edits, s, d) = prev[m];
    WerReport::from_counts(s, d, edits - s - d, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_is_zero() {
        let r = levenshtein_wer(&words("a b c"), &words("a b c")).unwrap();
        assert_eq!(r.wer_percent, 0.0);
    }

    #[test]
    fn single_deletion() {
        let r = levenshtein_wer(&words("a b c"), &words("a c")).unwrap();
        assert_eq!((r.substitutions, r.deletions, r.insertions), (0, 1, 0));
        assert!((r.wer_percent - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_reference_is_undefined() {
        assert!(matches!(levenshtein_wer::<&str>(&[], &["a"]), Err(Error::UndefinedWer)));
    }

    #[test]
    fn empty_hypothesis_deletes_everything() {
        let r = levenshtein_wer(&words("a b"), &[]).unwrap();
        assert_eq!((r.deletions, r.wer_percent), (2, 100.0));
    }

    #[test]
    fn prefers_substitution_over_insert_delete_pair() {
        let r = levenshtein_wer(&words("a b"), &words("a c")).unwrap();
        assert_eq!((r.substitutions, r.deletions, r.insertions), (1, 0, 0));
    }

    #[test]
    fn combine_pools_counts() {
        let a = WerReport::from_counts(1, 0, 0, 4).unwrap();
        let b = WerReport::from_counts(0, 1, 1, 6).unwrap();
        let c = WerReport::combine(&[a, b]).unwrap();
        assert_eq!(c.n_ref_words, 10);
        assert!((c.wer_percent - 30.0).abs() < 1e-12);
    }
}
