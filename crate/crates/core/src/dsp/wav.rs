use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::Waveform;
use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

fn format_error(e: hound::Error) -> Error {
    match e {
        hound::Error::Unsupported => Error::Unsupported("wav encoding".into()),
        other => Error::Format(other.to_string()),
    }
}

/// Reads a 16-bit PCM mono RIFF file, scaling samples by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    // Opening is the only genuine i/o step; hound reports short or garbled
    // headers as i/o errors too, so everything after it is a format error.
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let reader = WavReader::new(file).map_err(format_error)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Unsupported(format!(
            "{} channels, only mono is supported",
            spec.channels
        )));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Format(format!(
            "expected 16-bit integer PCM, got {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
        .collect::<Result<Vec<_>, _>>()
        .map_err(format_error)?;
    Waveform::new(samples, spec.sample_rate)
}

/// Writes a 16-bit PCM mono file. Samples are rounded and saturated.
pub fn write_wav(path: impl AsRef<Path>, wave: &Waveform) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &x in wave.samples() {
        let v = (x * PCM16_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        writer.write_sample(v)?;
    }
    writer.finalize()?;
    Ok(())
}
