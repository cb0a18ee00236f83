use std::fmt::Write as _;

use ndarray::{Array1, Array2, Axis};

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Standard deviations below this are clamped before dividing.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension mean and (floored) population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl NormStats {
    pub fn estimate(f: &FeatureMatrix) -> Self {
        let mean = f.frames().mean_axis(Axis(0)).expect("at least one frame");
        let std = f.frames().std_axis(Axis(0), 0.0).mapv(|s| s.max(STD_FLOOR));
        Self { mean, std }
    }

    /// Statistics over the rows of several matrices taken together.
    pub fn pooled<'a>(parts: impl IntoIterator<Item = &'a Array2<f64>> + Clone) -> Result<Self> {
        let mut n = 0usize;
        let mut sum: Option<Array1<f64>> = None;
        for p in parts.clone() {
            let s = p.sum_axis(Axis(0));
            match &mut sum {
                Some(acc) if acc.len() == s.len() => *acc += &s,
                Some(_) => return Err(Error::shape("pooled matrices differ in width")),
                None => sum = Some(s),
            }
            n += p.nrows();
        }
        let sum = sum.filter(|_| n > 0).ok_or_else(|| Error::shape("no frames to estimate statistics from"))?;
        let mean = sum / n as f64;
        let mut var = Array1::zeros(mean.len());
        for p in parts {
            for row in p.rows() {
                let d = &row - &mean;
                var += &(&d * &d);
            }
        }
        let std = (var / n as f64).mapv(|v| v.sqrt().max(STD_FLOOR));
        Ok(Self { mean, std })
    }

    pub fn apply(&self, frames: &Array2<f64>) -> Array2<f64> {
        (frames - &self.mean) / &self.std
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// One `mean std` pair per line, written with round-trip precision.
    pub fn to_text(&self) -> String {
        let mut out = format!("NORM1 {}\n", self.dim());
        for (m, s) in self.mean.iter().zip(&self.std) {
            writeln!(out, "{m:?} {s:?}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let dim: usize = header
            .strip_prefix("NORM1 ")
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| Error::Corrupt(format!("bad normalization header {header:?}")))?;
        let mut mean = Vec::with_capacity(dim);
        let mut std = Vec::with_capacity(dim);
        for line in lines {
            let mut parts = line.split_whitespace();
            let mut next = || -> Result<f64> {
                parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Corrupt(format!("bad normalization line {line:?}")))
            };
            mean.push(next()?);
            std.push(next()?);
        }
        if mean.len() != dim {
            return Err(Error::Corrupt(format!(
                "expected {dim} normalization rows, found {}",
                mean.len()
            )));
        }
        Ok(Self {
            mean: Array1::from(mean),
            std: Array1::from(std),
        })
    }
}

/// Z-normalizes every column. Without `stats` the statistics are estimated
/// from `f` itself; with `stats` the given (frozen) transform is applied.
pub fn z_normalize(f: &FeatureMatrix, stats: Option<&NormStats>) -> Result<(FeatureMatrix, NormStats)> {
    let stats = match stats {
        Some(s) if s.dim() != f.dim() => {
            return Err(Error::shape(format!(
                "normalization stats have {} dims, features have {}",
                s.dim(),
                f.dim()
            )))
        }
        Some(s) => s.clone(),
        None => NormStats::estimate(f),
    };
    let mut frames = f.frames() - &stats.mean;
    frames /= &stats.std;
    Ok((FeatureMatrix::new(frames, f.frame_shift(), f.layout())?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::Layout;
    use proptest::prelude::*;

    fn matrix(t: usize, d: usize, values: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix::new(
            Array2::from_shape_vec((t, d), values).unwrap(),
            0.01,
            Layout::plain(d),
        )
        .unwrap()
    }

    #[test]
    fn pooled_matches_concatenated_estimate() {
        let a = Array2::from_shape_fn((4, 3), |(i, j)| (i * 7 + j * 3) as f64 % 5.0);
        let b = Array2::from_shape_fn((2, 3), |(i, j)| (i + 2 * j) as f64 - 1.5);
        let joined = ndarray::concatenate(Axis(0), &[a.view(), b.view()]).unwrap();
        let whole = NormStats::estimate(&matrix(6, 3, joined.iter().copied().collect()));
        let pooled = NormStats::pooled([&a, &b]).unwrap();
        for (x, y) in whole.mean.iter().zip(&pooled.mean).chain(whole.std.iter().zip(&pooled.std)) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(NormStats::pooled(std::iter::empty::<&Array2<f64>>()).is_err());
    }

    #[test]
    fn constant_column_becomes_zero() {
        let f = matrix(3, 2, vec![1.0, 5.0, 2.0, 5.0, 3.0, 5.0]);
        let (n, stats) = z_normalize(&f, None).unwrap();
        assert_eq!(stats.std[1], STD_FLOOR);
        assert!(n.frames().column(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn frozen_stats_do_not_recentre_held_out_data() {
        let train = matrix(4, 1, vec![0.0, 1.0, 2.0, 3.0]);
        let held_out = matrix(3, 1, vec![10.0, 11.0, 12.0]);
        let (_, stats) = z_normalize(&train, None).unwrap();
        let (n, _) = z_normalize(&held_out, Some(&stats)).unwrap();
        assert!(n.frames().mean().unwrap() > 1.0);
    }

    #[test]
    fn mismatched_stats_are_rejected() {
        let (_, stats) = z_normalize(&matrix(2, 1, vec![0.0, 1.0]), None).unwrap();
        assert!(z_normalize(&matrix(1, 2, vec![0.0, 1.0]), Some(&stats)).is_err());
    }

    #[test]
    fn stats_text_round_trip_is_exact() {
        let f = matrix(3, 2, vec![0.1, 0.7, 1.3, -2.0, 9.9, 1e-3]);
        let stats = NormStats::estimate(&f);
        assert_eq!(NormStats::from_text(&stats.to_text()).unwrap(), stats);
        assert!(NormStats::from_text("NORM1 3\n0 1\n").is_err());
    }

    proptest! {
        #[test]
        fn normalized_columns_are_standard(
            (t, d, values) in (2usize..20, 1usize..5)
                .prop_flat_map(|(t, d)| (Just(t), Just(d), prop::collection::vec(-100.0f64..100.0, t * d)))
        ) {
            let f = matrix(t, d, values);
            let (n, stats) = z_normalize(&f, None).unwrap();
            for c in 0..d {
                if stats.std[c] > 1e-3 {
                    let col = n.frames().column(c);
                    prop_assert!(col.mean().unwrap().abs() < 1e-9);
                    prop_assert!((col.std(0.0) - 1.0).abs() < 1e-9);
                }
            }
            let (again, _) = z_normalize(&n, None).unwrap();
            for (a, b) in again.frames().iter().zip(n.frames()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
