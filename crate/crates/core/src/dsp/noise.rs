//! Additive noise: parametric noise types and mixing at a target SNR.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::biquad::Biquad;
use super::{mean_power, Waveform};
use crate::error::{Error, Result};

const CROSSFADE_SECS: f64 = 0.050;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    White,
    Pink,
    /// Speech-band noise with a 4 Hz amplitude modulation.
    Babble,
    /// 50 Hz mains hum with its first harmonics.
    Hum,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [
        NoiseKind::White,
        NoiseKind::Pink,
        NoiseKind::Babble,
        NoiseKind::Hum,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::Babble => "babble",
            NoiseKind::Hum => "hum",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown noise type {s:?} (white, pink, babble, hum)"))
    }
}

pub fn generate_noise(kind: NoiseKind, len: usize, sample_rate: u32, seed: u64) -> Result<Waveform> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = sample_rate as f64;
    let mut white = || -> f64 { StandardNormal.sample(&mut rng) };
    let samples: Vec<f64> = match kind {
        NoiseKind::White => (0..len).map(|_| white()).collect(),
        NoiseKind::Pink => {
            // Paul Kellet's economy pinking filter
            let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
            (0..len)
                .map(|_| {
                    let w = white();
                    b0 = 0.99765 * b0 + w * 0.0990460;
                    b1 = 0.96300 * b1 + w * 0.2965164;
                    b2 = 0.57000 * b2 + w * 1.0526913;
                    b0 + b1 + b2 + w * 0.1848
                })
                .collect()
        }
        NoiseKind::Babble => {
            let mut band = Biquad::bandpass(600.0, 0.7, sr);
            let phase = white().abs();
            (0..len)
                .map(|n| {
                    let am = 1.0 + 0.9 * (2.0 * PI * 4.0 * n as f64 / sr + phase).sin();
                    am * band.tick(white())
                })
                .collect()
        }
        NoiseKind::Hum => {
            let phase = white();
            (0..len)
                .map(|n| {
                    let t = n as f64 / sr;
                    (1..=3)
                        .map(|h| (2.0 * PI * 50.0 * h as f64 * t + phase).sin() / h as f64)
                        .sum::<f64>()
                        + 0.01 * white()
                })
                .collect()
        }
    };
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if peak > 0.0 { 0.5 / peak } else { 0.0 };
    Waveform::new(samples.into_iter().map(|x| x * scale).collect(), sample_rate)
}

/// Repeats `noise` until it covers `len` samples, overlapping consecutive
/// copies by a 50 ms linear crossfade. Longer noise is simply truncated.
pub fn tile_noise(noise: &Waveform, len: usize) -> Vec<f64> {
    let src = noise.samples();
    if src.len() >= len {
        return src[..len].to_vec();
    }
    let xf = ((CROSSFADE_SECS * noise.sample_rate() as f64) as usize).min(src.len() / 2);
    let hop = src.len() - xf;
    let mut out = vec![0.0; len];
    let mut start = 0;
    let mut first = true;
    while start < len {
        let fade_out = start + hop < len;
        for (i, &x) in src.iter().enumerate() {
            let n = start + i;
            if n >= len {
                break;
            }
            let mut w = 1.0;
            if !first && i < xf {
                w = i as f64 / xf as f64;
            }
            if fade_out && i >= hop {
                w = (src.len() - i) as f64 / xf as f64;
            }
            out[n] += w * x;
        }
        first = false;
        start += hop.max(1);
    }
    out
}

/// Gain applied to `noise` so that `clean` over the scaled noise reaches
/// `snr_db`: `sqrt(P_clean / P_noise) * 10^(-snr/20)`.
pub fn noise_gain(clean: &[f64], noise: &[f64], snr_db: f64) -> Result<f64> {
    let pn = mean_power(noise);
    if pn <= 0.0 {
        return Err(Error::DegenerateNoise);
    }
    Ok((mean_power(clean) / pn).sqrt() * 10f64.powf(-snr_db / 20.0))
}

/// Adds `noise` (tiled to length) at `snr_db` and clips the sum to [-1, 1].
pub fn mix_noise_at_snr(clean: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Waveform> {
    if clean.sample_rate() != noise.sample_rate() {
        return Err(Error::Unsupported(format!(
            "noise at {} Hz cannot be mixed into {} Hz audio",
            noise.sample_rate(),
            clean.sample_rate()
        )));
    }
    let tiled = tile_noise(noise, clean.len());
    let gain = noise_gain(clean.samples(), &tiled, snr_db)?;
    let mut clipped = 0usize;
    let mixed: Vec<f64> = clean
        .samples()
        .iter()
        .zip(&tiled)
        .map(|(c, n)| {
            let y = c + gain * n;
            if y.abs() > 1.0 {
                clipped += 1;
            }
            y.clamp(-1.0, 1.0)
        })
        .collect();
    if clipped > 0 {
        log::warn!(
            "clipped {:.3}% of samples mixing at {snr_db} dB",
            100.0 * clipped as f64 / mixed.len() as f64
        );
    }
    Waveform::new(mixed, clean.sample_rate())
}
