//! Normalized modulation coefficients.
//!
//! A simplified modulation front-end: the signal is split by a bank of
//! mel-spaced 4th-order band-pass filters, each subband's amplitude
//! modulation is tracked by half-wave rectification followed by a 30 Hz
//! low-pass, and the per-frame envelope energy is divided by the subband's
//! mean power. The log of that ratio is decorrelated with an orthonormal
//! DCT-II.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::Array2;

use super::biquad::Biquad;
use super::fbank::{hz_to_mel, mel_to_hz, num_frames, FrameSpec, LOG_FLOOR};
use super::{mean_power, FeatureMatrix, Layout, Waveform};
use crate::error::{Error, Result};

const LOWEST_CENTER_HZ: f64 = 100.0;
const ENVELOPE_CUTOFF_HZ: f64 = 30.0;
const POWER_EPS: f64 = 1e-12;

fn band_centers(n_bands: usize, sample_rate: f64) -> Vec<f64> {
    let lo = hz_to_mel(LOWEST_CENTER_HZ);
    let hi = hz_to_mel(0.45 * sample_rate);
    (0..n_bands)
        .map(|i| {
            let frac = if n_bands == 1 {
                0.5
            } else {
                i as f64 / (n_bands - 1) as f64
            };
            mel_to_hz(lo + frac * (hi - lo))
        })
        .collect()
}

/// Envelope of one subband, plus that subband's mean power.
fn subband_envelope(samples: &[f64], center: f64, q: f64, sr: f64) -> (Vec<f64>, f64) {
    let mut band = samples.to_vec();
    // two cascaded 2nd-order sections make the 4th-order band-pass
    Biquad::bandpass(center, q, sr).process(&mut band);
    Biquad::bandpass(center, q, sr).process(&mut band);
    let power = mean_power(&band);

    let mut lp = Biquad::lowpass(ENVELOPE_CUTOFF_HZ, FRAC_1_SQRT_2, sr);
    for x in band.iter_mut() {
        *x = lp.tick(x.max(0.0));
    }
    (band, power)
}

fn dct_matrix(n_out: usize, n_in: usize) -> Array2<f64> {
    Array2::from_shape_fn((n_out, n_in), |(k, n)| {
        let scale = if k == 0 {
            (1.0 / n_in as f64).sqrt()
        } else {
            (2.0 / n_in as f64).sqrt()
        };
        scale * (PI * k as f64 * (n as f64 + 0.5) / n_in as f64).cos()
    })
}

/// Modulation features with 40 mel-spaced subbands reduced to `n_coeffs`
/// coefficients per frame. Framing matches [`super::logmel_filterbank`].
pub fn nmc_features(wave: &Waveform, n_coeffs: usize, frames: FrameSpec) -> Result<FeatureMatrix> {
    const N_BANDS: usize = 40;
    if n_coeffs == 0 || n_coeffs > N_BANDS {
        return Err(Error::config(format!(
            "n_coeffs must be in 1..={N_BANDS}, got {n_coeffs}"
        )));
    }
    let (win, shift) = frames.check(wave)?;
    let t = num_frames(wave.len(), win, shift);
    let sr = wave.sample_rate() as f64;

    let centers = band_centers(N_BANDS, sr);
    let mut log_ratio = Array2::zeros((t, N_BANDS));
    for (b, &center) in centers.iter().enumerate() {
        let spacing = if b + 1 < N_BANDS {
            centers[b + 1] - center
        } else {
            center - centers[b - 1]
        };
        let q = (center / spacing).max(0.5);
        let (env, power) = subband_envelope(wave.samples(), center, q, sr);
        for i in 0..t {
            let e = mean_power(&env[i * shift..i * shift + win]);
            log_ratio[[i, b]] = (e / (power + POWER_EPS)).max(LOG_FLOOR).ln();
        }
    }

    let dct = dct_matrix(n_coeffs, N_BANDS);
    let coeffs = log_ratio.dot(&dct.t());
    FeatureMatrix::new(coeffs, frames.shift, Layout::plain(n_coeffs))
}
