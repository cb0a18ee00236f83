use ndarray::Array2;

use crate::dsp::{FeatureMatrix, Layout};
use crate::error::{Error, Result};

pub const N_TVS: usize = 8;

/// Channel order of every TV matrix.
pub const TV_NAMES: [&str; N_TVS] = ["LA", "LP", "TBCL", "TBCD", "TTCL", "TTCD", "VEL", "GLO"];

pub const LA: usize = 0;
pub const LP: usize = 1;
pub const TBCL: usize = 2;
pub const TBCD: usize = 3;
pub const TTCL: usize = 4;
pub const TTCD: usize = 5;
pub const VEL: usize = 6;
pub const GLO: usize = 7;

/// Rest position of every channel.
pub const NEUTRAL: f64 = 0.5;

/// Tract-variable trajectories, `T x 8`, each value in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TvTrajectory {
    frames: Array2<f64>,
    frame_shift: f64,
}

impl TvTrajectory {
    pub fn new(frames: Array2<f64>, frame_shift: f64) -> Result<Self> {
        if frames.ncols() != N_TVS {
            return Err(Error::shape(format!(
                "TV trajectories have {N_TVS} channels, got {}",
                frames.ncols()
            )));
        }
        if frames.nrows() == 0 {
            return Err(Error::shape("TV trajectory needs at least one frame"));
        }
        if let Some(v) = frames.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Format(format!("TV value {v} outside [0, 1]")));
        }
        Ok(Self {
            frames,
            frame_shift,
        })
    }

    /// Clamps into [0, 1] instead of rejecting.
    pub fn clamped(mut frames: Array2<f64>, frame_shift: f64) -> Result<Self> {
        if frames.iter().any(|v| v.is_nan()) {
            return Err(Error::Format("NaN in TV trajectory".into()));
        }
        frames.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Self::new(frames, frame_shift)
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn truncate(&mut self, n: usize) {
        let n = n.clamp(1, self.n_frames());
        if n < self.n_frames() {
            self.frames = self.frames.slice(ndarray::s![..n, ..]).to_owned();
        }
    }

    pub fn to_features(&self) -> FeatureMatrix {
        FeatureMatrix::new(self.frames.clone(), self.frame_shift, Layout::plain(N_TVS))
            .expect("TV values are finite")
    }

    pub fn from_features(f: &FeatureMatrix) -> Result<Self> {
        Self::new(f.frames().clone(), f.frame_shift())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_and_wrong_width() {
        assert!(TvTrajectory::new(Array2::from_elem((2, 8), 1.5), 0.01).is_err());
        assert!(TvTrajectory::new(Array2::zeros((2, 7)), 0.01).is_err());
        let t = TvTrajectory::clamped(Array2::from_elem((2, 8), 1.5), 0.01).unwrap();
        assert!(t.frames().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn feature_round_trip() {
        let t = TvTrajectory::new(Array2::from_elem((3, 8), 0.25), 0.01).unwrap();
        assert_eq!(TvTrajectory::from_features(&t.to_features()).unwrap(), t);
    }
}
