//! Audio ingestion and the acoustic front-end.

mod biquad;
mod deltas;
mod fbank;
mod fmx;
mod nmc;
mod noise;
mod norm;
mod splice;
mod wav;

pub use deltas::append_deltas;
pub use fbank::{
    hz_to_mel, logmel_filterbank, mel_filterbank, mel_to_hz, num_frames, FrameSpec, LOG_FLOOR,
};
pub use fmx::{read_fmx, write_fmx, FMX_MAGIC};
pub use nmc::nmc_features;
pub use noise::{generate_noise, mix_noise_at_snr, noise_gain, tile_noise, NoiseKind};
pub use norm::{z_normalize, NormStats, STD_FLOOR};
pub use splice::{splice_context, SpliceSpec};
pub use wav::{read_wav, write_wav};

pub(crate) use biquad::Biquad;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const N_BANDS: usize = 40;

/// The two per-frame front-ends used by the models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrontEnd {
    /// 40 log-mel bands with deltas and delta-deltas (120 per frame).
    Fbank,
    /// 40 normalized modulation coefficients.
    Nmc,
}

impl FrontEnd {
    pub fn name(&self) -> &'static str {
        match self {
            FrontEnd::Fbank => "fbank",
            FrontEnd::Nmc => "nmc",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FrontEnd::Fbank => 3 * N_BANDS,
            FrontEnd::Nmc => N_BANDS,
        }
    }

    pub fn extract(&self, wave: &Waveform) -> Result<FeatureMatrix> {
        if wave.sample_rate() != DEFAULT_SAMPLE_RATE {
            return Err(Error::Unsupported(format!(
                "{} Hz audio; resampling is not supported, expected {DEFAULT_SAMPLE_RATE} Hz",
                wave.sample_rate()
            )));
        }
        match self {
            FrontEnd::Fbank => append_deltas(&logmel_filterbank(wave, N_BANDS, FrameSpec::default())?),
            FrontEnd::Nmc => nmc_features(wave, N_BANDS, FrameSpec::default()),
        }
    }
}

impl std::str::FromStr for FrontEnd {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fbank" => Ok(FrontEnd::Fbank),
            "nmc" => Ok(FrontEnd::Nmc),
            other => Err(format!("unknown front-end {other:?} (fbank, nmc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Length { needed: 1, got: 0 });
        }
        if sample_rate == 0 {
            return Err(Error::Format("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::Format(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Mean power.
    pub fn power(&self) -> f64 {
        mean_power(&self.samples)
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

pub(crate) fn mean_power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// How the columns of a [`FeatureMatrix`] are organized.
///
/// Columns are ordered `[context][stream][band]`: spliced frames are
/// concatenated, each frame holds its streams (static, delta, delta-delta)
/// back to back, and each stream holds `n_bands` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_bands: usize,
    pub n_streams: usize,
    pub context_width: usize,
}

impl Layout {
    pub fn plain(n_bands: usize) -> Self {
        Self {
            n_bands,
            n_streams: 1,
            context_width: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_bands * self.n_streams * self.context_width
    }
}

/// Time-major feature frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    frames: Array2<f64>,
    frame_shift: f64,
    layout: Layout,
}

impl FeatureMatrix {
    pub fn new(frames: Array2<f64>, frame_shift: f64, layout: Layout) -> Result<Self> {
        let (t, d) = frames.dim();
        if t == 0 {
            return Err(Error::shape("feature matrix needs at least one frame"));
        }
        if d != layout.dim() {
            return Err(Error::shape(format!(
                "{d} columns do not match layout {layout:?} (dim {})",
                layout.dim()
            )));
        }
        if frames.iter().any(|x| !x.is_finite()) {
            return Err(Error::Format("non-finite feature value".into()));
        }
        Ok(Self {
            frames,
            frame_shift,
            layout,
        })
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn into_frames(self) -> Array2<f64> {
        self.frames
    }

    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    /// Keeps the first `n` frames.
    pub fn truncate(&mut self, n: usize) {
        let n = n.clamp(1, self.n_frames());
        if n < self.n_frames() {
            self.frames = self.frames.slice(ndarray::s![..n, ..]).to_owned();
        }
    }
}
