//! Log-mel filterbank energies.
//!
//! Frames are Hamming-windowed, zero-padded to the next power of two
//! (512 at 16 kHz / 25 ms) and reduced to a power spectrum, which is
//! weighted by triangular filters spaced evenly on the mel scale between
//! 0 Hz and Nyquist.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{FeatureMatrix, Layout, Waveform};
use crate::error::{Error, Result};

/// Energies are clamped to this value before taking the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSpec {
    /// Window length in seconds.
    pub win: f64,
    /// Frame shift in seconds.
    pub shift: f64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            win: 0.025,
            shift: 0.010,
        }
    }
}

impl FrameSpec {
    pub fn win_samples(&self, sample_rate: u32) -> usize {
        (self.win * sample_rate as f64).round() as usize
    }

    pub fn shift_samples(&self, sample_rate: u32) -> usize {
        (self.shift * sample_rate as f64).round() as usize
    }

    pub(crate) fn check(&self, wave: &Waveform) -> Result<(usize, usize)> {
        let win = self.win_samples(wave.sample_rate());
        let shift = self.shift_samples(wave.sample_rate());
        if win == 0 || shift == 0 {
            return Err(Error::config("window and shift must span at least one sample"));
        }
        if wave.len() < win {
            return Err(Error::Length {
                needed: win,
                got: wave.len(),
            });
        }
        Ok((win, shift))
    }
}

/// `floor((len - win) / shift) + 1`, or zero when the signal is shorter
/// than one window.
pub fn num_frames(len: usize, win: usize, shift: usize) -> usize {
    if len < win {
        0
    } else {
        (len - win) / shift + 1
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters as an `n_bands x (n_fft/2 + 1)` weight matrix.
pub fn mel_filterbank(n_bands: usize, n_fft: usize, sample_rate: u32) -> Array2<f64> {
    let n_bins = n_fft / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_bands + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_bands + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / n_fft as f64;

    let mut weights = Array2::zeros((n_bands, n_bins));
    for b in 0..n_bands {
        let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
        for k in 0..n_bins {
            let f = k as f64 * bin_hz;
            let w = if f > lo && f <= mid {
                (f - lo) / (mid - lo)
            } else if f > mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
            weights[[b, k]] = w;
        }
    }
    weights
}

pub(crate) fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
        .collect()
}

pub(crate) struct PowerSpectrum {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    buf: Vec<Complex<f64>>,
}

impl PowerSpectrum {
    pub(crate) fn new(win: usize) -> Self {
        let n_fft = win.next_power_of_two();
        Self {
            fft: FftPlanner::new().plan_fft_forward(n_fft),
            window: hamming(win),
            buf: vec![Complex::default(); n_fft],
        }
    }

    pub(crate) fn n_fft(&self) -> usize {
        self.buf.len()
    }

    pub(crate) fn compute(&mut self, frame: &[f64], out: &mut [f64]) {
        for (slot, (x, w)) in self.buf.iter_mut().zip(frame.iter().zip(&self.window)) {
            *slot = Complex::new(x * w, 0.0);
        }
        for slot in self.buf.iter_mut().skip(frame.len()) {
            *slot = Complex::default();
        }
        self.fft.process(&mut self.buf);
        for (o, c) in out.iter_mut().zip(&self.buf) {
            *o = c.norm_sqr();
        }
    }
}

/// Log mel filterbank energies, one row per frame.
pub fn logmel_filterbank(wave: &Waveform, n_bands: usize, frames: FrameSpec) -> Result<FeatureMatrix> {
    if n_bands == 0 {
        return Err(Error::config("n_bands must be positive"));
    }
    let (win, shift) = frames.check(wave)?;
    let t = num_frames(wave.len(), win, shift);

    let mut spec = PowerSpectrum::new(win);
    let weights = mel_filterbank(n_bands, spec.n_fft(), wave.sample_rate());
    let mut power = vec![0.0; spec.n_fft() / 2 + 1];
    let mut out = Array2::zeros((t, n_bands));

    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let start = i * shift;
        spec.compute(&wave.samples()[start..start + win], &mut power);
        for (b, slot) in row.iter_mut().enumerate() {
            let e: f64 = weights
                .row(b)
                .iter()
                .zip(&power)
                .map(|(w, p)| w * p)
                .sum();
            *slot = e.max(LOG_FLOOR).ln();
        }
    }
    FeatureMatrix::new(out, frames.shift, Layout::plain(n_bands))
}
