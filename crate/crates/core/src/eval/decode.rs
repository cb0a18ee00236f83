use crate::error::{Error, Result};
use crate::inversion::SILENCE;
use crate::nn::Matrix;
use crate::training::argmax;

/// Per-frame class posteriors; rows sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePosteriors {
    probs: Matrix,
}

impl FramePosteriors {
    pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(probs: Matrix) -> Result<Self> {
        if probs.ncols() == 0 {
            return Err(Error::shape("posteriors need at least one class"));
        }
        for (t, row) in probs.rows().into_iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Format(format!("frame {t}: posterior outside [0, 1]")));
            }
            let sum = row.sum();
            if (sum - 1.0).abs() > Self::ROW_SUM_TOLERANCE {
                return Err(Error::Format(format!("frame {t}: posteriors sum to {sum}")));
            }
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    pub fn n_frames(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.probs.ncols()
    }

    /// Per-frame argmax, lowest class index on ties.
    pub fn best_path(&self) -> Vec<usize> {
        self.probs.rows().into_iter().map(|r| argmax(r.iter().copied())).collect()
    }
}

/// Collapses repeats of a class sequence and drops silence.
pub fn collapse(path: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut last = None;
    for &c in path {
        if last != Some(c) && c != SILENCE {
            out.push(c);
        }
        last = Some(c);
    }
    out
}

/// Frame argmax, repeats collapsed, silence (class 0) removed, each class
/// mapped through `class_to_token`.
pub fn greedy_decode(p: &FramePosteriors, class_to_token: &[String]) -> Result<Vec<String>> {
    if class_to_token.len() < p.n_classes() {
        return Err(Error::shape(format!(
            "token map covers {} classes, posteriors have {}",
            class_to_token.len(),
            p.n_classes()
        )));
    }
    Ok(collapse(&p.best_path())
        .into_iter()
        .map(|c| class_to_token[c].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn one_hot(path: &[usize], k: usize) -> FramePosteriors {
        let mut m = Array2::zeros((path.len(), k));
        for (t, &c) in path.iter().enumerate() {
            m[[t, c]] = 1.0;
        }
        FramePosteriors::new(m).unwrap()
    }

    fn tokens() -> Vec<String> {
        ["sil", "a", "b", "c"].map(String::from).to_vec()
    }

    #[test]
    fn collapses_repeats() {
        let p = one_hot(&[1, 1, 1, 2, 2], 4);
        assert_eq!(greedy_decode(&p, &tokens()).unwrap(), vec!["a", "b"]);
    }

    #[test]
    fn silence_only_is_empty() {
        assert!(greedy_decode(&one_hot(&[0, 0, 0], 4), &tokens()).unwrap().is_empty());
    }

    #[test]
    fn silence_separates_repeated_tokens() {
        let p = one_hot(&[1, 0, 1], 4);
        assert_eq!(greedy_decode(&p, &tokens()).unwrap(), vec!["a", "a"]);
    }

    #[test]
    fn ties_go_to_the_lowest_class() {
        let p = FramePosteriors::new(Array2::from_shape_vec((1, 4), vec![0.0, 0.5, 0.5, 0.0]).unwrap()).unwrap();
        assert_eq!(greedy_decode(&p, &tokens()).unwrap(), vec!["a"]);
    }

    #[test]
    fn rejects_rows_not_summing_to_one() {
        assert!(FramePosteriors::new(Array2::from_elem((1, 2), 0.4)).is_err());
        assert!(greedy_decode(&one_hot(&[3], 4), &tokens()[..2]).is_err());
    }

    proptest! {
        #[test]
        fn output_never_longer_than_input(path in proptest::collection::vec(0usize..4, 0..40)) {
            let out = greedy_decode(&one_hot(&path, 4), &tokens()).unwrap();
            prop_assert!(out.len() <= path.len());
        }
    }
}
