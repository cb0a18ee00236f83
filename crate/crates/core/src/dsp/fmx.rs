//! Flat binary feature files.
//!
//! Layout, all little-endian: the magic `FMX1`, then `u32` frame count,
//! `u32` dimension, the `u32` layout triple (bands, streams, context),
//! the frame shift as `f64`, and finally the frames row-major as `f32`.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{FeatureMatrix, Layout};
use crate::error::{Error, Result};

pub const FMX_MAGIC: &[u8; 4] = b"FMX1";
const HEADER_LEN: usize = 4 + 5 * 4 + 8;

impl FeatureMatrix {
    pub fn to_bytes(&self) -> Vec<u8> {
        let (t, d) = self.frames().dim();
        let layout = self.layout();
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * t * d);
        out.extend_from_slice(FMX_MAGIC);
        for v in [t, d, layout.n_bands, layout.n_streams, layout.context_width] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.frame_shift().to_le_bytes());
        for &x in self.frames().iter() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Corrupt("feature file shorter than its header".into()));
        }
        if &bytes[..4] != FMX_MAGIC {
            return Err(Error::Version {
                expected: "FMX1".into(),
                found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
            });
        }
        let word = |i: usize| {
            let at = 4 + 4 * i;
            u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize
        };
        let (t, d) = (word(0), word(1));
        let layout = Layout {
            n_bands: word(2),
            n_streams: word(3),
            context_width: word(4),
        };
        let frame_shift = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
        let body = &bytes[HEADER_LEN..];
        if body.len() != 4 * t * d {
            return Err(Error::Corrupt(format!(
                "expected {} bytes of frames, found {}",
                4 * t * d,
                body.len()
            )));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        let frames = Array2::from_shape_vec((t, d), values).map_err(|e| Error::Corrupt(e.to_string()))?;
        FeatureMatrix::new(frames, frame_shift, layout)
    }
}

pub fn write_fmx(path: impl AsRef<Path>, f: &FeatureMatrix) -> Result<()> {
    fs::write(path, f.to_bytes())?;
    Ok(())
}

pub fn read_fmx(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    FeatureMatrix::from_bytes(&fs::read(path)?)
}
