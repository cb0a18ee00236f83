use ndarray::{s, Array2, ArrayView2};

use super::{FeatureMatrix, Layout};
use crate::error::{Error, Result};

const DELTA_WINDOW: usize = 2;

/// Regression deltas over +/-2 frames with edge replication:
/// `d[t] = sum_n n * (c[t+n] - c[t-n]) / (2 * sum_n n^2)`.
fn regression(c: ArrayView2<f64>) -> Array2<f64> {
    let (t, d) = c.dim();
    let denom = 2.0 * (1..=DELTA_WINDOW).map(|n| (n * n) as f64).sum::<f64>();
    let last = t as isize - 1;
    let clamp = |i: isize| i.clamp(0, last) as usize;

    let mut out = Array2::zeros((t, d));
    for i in 0..t as isize {
        for n in 1..=DELTA_WINDOW as isize {
            let fwd = c.row(clamp(i + n));
            let back = c.row(clamp(i - n));
            let mut row = out.row_mut(i as usize);
            for ((o, a), b) in row.iter_mut().zip(fwd).zip(back) {
                *o += n as f64 * (a - b);
            }
        }
    }
    out /= denom;
    out
}

/// Appends delta and delta-delta streams: `[static | delta | delta-delta]`.
pub fn append_deltas(f: &FeatureMatrix) -> Result<FeatureMatrix> {
    let layout = f.layout();
    if layout.n_streams != 1 || layout.context_width != 1 {
        return Err(Error::shape(format!(
            "deltas need a single unspliced stream, got {layout:?}"
        )));
    }
    let (t, d) = f.frames().dim();
    let delta = regression(f.frames().view());
    let delta2 = regression(delta.view());

    let mut out = Array2::zeros((t, 3 * d));
    out.slice_mut(s![.., ..d]).assign(f.frames());
    out.slice_mut(s![.., d..2 * d]).assign(&delta);
    out.slice_mut(s![.., 2 * d..]).assign(&delta2);
    FeatureMatrix::new(
        out,
        f.frame_shift(),
        Layout {
            n_bands: layout.n_bands,
            n_streams: 3,
            context_width: 1,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column(values: &[f64]) -> FeatureMatrix {
        let a = Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap();
        FeatureMatrix::new(a, 0.01, Layout::plain(1)).unwrap()
    }

    #[test]
    fn constant_features_have_zero_deltas() {
        let a = Array2::from_elem((10, 4), 3.5);
        let f = FeatureMatrix::new(a, 0.01, Layout::plain(4)).unwrap();
        let out = append_deltas(&f).unwrap();
        assert_eq!(out.dim(), 12);
        assert!(out.frames().slice(s![.., 4..]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linear_ramp_interior_delta_is_one() {
        let ramp: Vec<f64> = (0..10).map(|t| t as f64).collect();
        let out = append_deltas(&column(&ramp)).unwrap();
        for t in 2..8 {
            assert!((out.frames()[[t, 1]] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_frame_gives_zero_deltas() {
        let out = append_deltas(&column(&[4.0])).unwrap();
        assert_eq!(out.frames().row(0).to_vec(), vec![4.0, 0.0, 0.0]);
    }

    #[test]
    fn spliced_input_is_rejected() {
        let a = Array2::zeros((3, 6));
        let f = FeatureMatrix::new(
            a,
            0.01,
            Layout {
                n_bands: 2,
                n_streams: 1,
                context_width: 3,
            },
        )
        .unwrap();
        assert!(append_deltas(&f).is_err());
    }

    proptest! {
        #[test]
        fn time_reversal_negates_delta(values in prop::collection::vec(-10.0f64..10.0, 12..30)) {
            let fwd = append_deltas(&column(&values)).unwrap();
            let rev: Vec<f64> = values.iter().rev().copied().collect();
            let bwd = append_deltas(&column(&rev)).unwrap();
            let t = values.len();
            // delta-delta looks 4 frames out, so stay clear of both edges.
            for i in 4..t - 4 {
                let j = t - 1 - i;
                prop_assert!((fwd.frames()[[i, 1]] + bwd.frames()[[j, 1]]).abs() < 1e-9);
                prop_assert!((fwd.frames()[[i, 2]] - bwd.frames()[[j, 2]]).abs() < 1e-9);
            }
        }
    }
}
