use ndarray::{s, Array2};

use super::{FeatureMatrix, Layout};
use crate::error::Result;

/// Context window of `left + 1 + right` frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpliceSpec {
    pub left: usize,
    pub right: usize,
}

impl Default for SpliceSpec {
    fn default() -> Self {
        Self { left: 8, right: 8 }
    }
}

impl SpliceSpec {
    pub fn symmetric(half: usize) -> Self {
        Self {
            left: half,
            right: half,
        }
    }

    pub fn width(&self) -> usize {
        self.left + self.right + 1
    }
}

/// Row `t` becomes `f[t-left] ++ ... ++ f[t+right]`, replicating the first
/// and last frames past the edges.
pub fn splice_context(f: &FeatureMatrix, spec: SpliceSpec) -> Result<FeatureMatrix> {
    let (t, d) = f.frames().dim();
    let width = spec.width();
    let mut out = Array2::zeros((t, d * width));
    let last = t as isize - 1;
    for i in 0..t as isize {
        for k in 0..width {
            let src = (i + k as isize - spec.left as isize).clamp(0, last) as usize;
            out.slice_mut(s![i as usize, k * d..(k + 1) * d])
                .assign(&f.frames().row(src));
        }
    }
    let layout = f.layout();
    FeatureMatrix::new(
        out,
        f.frame_shift(),
        Layout {
            context_width: layout.context_width * width,
            ..layout
        },
    )
}
