//! RIFF/WAVE with 16-bit PCM or 32-bit IEEE float samples.

use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat as HoundFormat, WavReader, WavSpec, WavWriter};
use ndarray::Array2;

use crate::dsp::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    Pcm16,
    #[default]
    Float32,
}

fn describe(e: hound::Error) -> String {
    match e {
        hound::Error::Unsupported => "format tag unsupported (PCM16 or float32 only)".into(),
        hound::Error::FormatError(what) => format!("malformed header: {what}"),
        other => other.to_string(),
    }
}

pub fn decode_wav(bytes: &[u8], path: &Path) -> Result<(Waveform, SampleFormat)> {
    let bad = |msg: String| Error::format(path, msg);
    let reader = WavReader::new(Cursor::new(bytes)).map_err(|e| bad(describe(e)))?;
    let spec = reader.spec();
    let format = match (spec.sample_format, spec.bits_per_sample) {
        (HoundFormat::Int, 16) => SampleFormat::Pcm16,
        (HoundFormat::Float, 32) => SampleFormat::Float32,
        (kind, bits) => {
            return Err(bad(format!(
                "bits per sample {bits} unsupported for {kind:?} samples (PCM16 or float32 only)"
            )))
        }
    };
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(bad("channel count is 0".into()));
    }
    let total = reader.len() as usize;
    if !total.is_multiple_of(channels) {
        return Err(bad(format!(
            "data holds {total} samples, not a multiple of {channels} channels"
        )));
    }
    let interleaved: Vec<f64> = match format {
        SampleFormat::Pcm16 => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        SampleFormat::Float32 => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>(),
    }
    .map_err(|e| bad(format!("payload shorter than header claims ({e})")))?;
    let frames = total / channels;
    let samples = Array2::from_shape_fn((channels, frames), |(m, t)| interleaved[t * channels + m]);
    let wave = Waveform::new(samples, spec.sample_rate).map_err(|e| bad(format!("samples: {e}")))?;
    Ok((wave, format))
}

pub fn encode_wav(wave: &Waveform, format: SampleFormat) -> Result<Vec<u8>> {
    let channels = u16::try_from(wave.channels())
        .map_err(|_| Error::range(format!("{} channels exceed the WAV limit", wave.channels())))?;
    let spec = WavSpec {
        channels,
        sample_rate: wave.sample_rate(),
        bits_per_sample: match format {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match format {
            SampleFormat::Pcm16 => HoundFormat::Int,
            SampleFormat::Float32 => HoundFormat::Float,
        },
    };
    let wav_err = |e: hound::Error| Error::range(format!("WAV encoding: {e}"));
    let mut buf = Cursor::new(Vec::new());
    let mut w = WavWriter::new(&mut buf, spec).map_err(wav_err)?;
    let s = wave.samples();
    for t in 0..wave.len() {
        for m in 0..wave.channels() {
            let v = s[[m, t]];
            match format {
                SampleFormat::Pcm16 => w.write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16),
                SampleFormat::Float32 => w.write_sample(v as f32),
            }
            .map_err(wav_err)?;
        }
    }
    w.finalize().map_err(wav_err)?;
    Ok(buf.into_inner())
}

pub fn read_wav(path: &Path) -> Result<Waveform> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes, path).map(|(w, _)| w)
}

pub fn write_wav(path: &Path, wave: &Waveform, format: SampleFormat) -> Result<()> {
    std::fs::write(path, encode_wav(wave, format)?).map_err(|e| Error::io(path, e))
}
