//! RIFF/WAVE input and output.
//!
//! Reads 16-bit PCM or 32-bit float files with any channel count; writes
//! 32-bit float.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::framing::MultichannelSignal;
use crate::scalar::Real;

/// Reads a WAV file into a channel-major signal.
pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<MultichannelSignal<T>> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        _ => return Err(Error::Wav(hound::Error::Unsupported)),
    };
    if channels == 0 || !interleaved.len().is_multiple_of(channels) {
        return Err(Error::ShapeMismatch("wav data does not fill whole frames".into()));
    }
    let len = interleaved.len() / channels;
    let mut data = Vec::with_capacity(interleaved.len());
    for m in 0..channels {
        data.extend((0..len).map(|i| T::lit(interleaved[i * channels + m])));
    }
    MultichannelSignal::from_flat(spec.sample_rate, channels, data)
}

/// Writes a signal as 32-bit float WAV.
pub fn write_wav<T: Real>(path: impl AsRef<Path>, signal: &MultichannelSignal<T>) -> Result<()> {
    let spec = WavSpec {
        channels: signal.channels() as u16,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for i in 0..signal.len() {
        for ch in signal.iter_channels() {
            writer.write_sample(ch[i].to_f32().unwrap_or(0.0))?;
        }
    }
    writer.finalize()?;
    Ok(())
}
