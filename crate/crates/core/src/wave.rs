//! Mono RIFF/WAVE input and output.
//!
//! Samples are held as `f64` normalized to full scale regardless of the
//! on-disk depth. 16-bit PCM maps `i16::MIN..=i16::MAX` onto
//! `[-1.0, 32767/32768]`; 32-bit float files are read verbatim.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use log::warn;

use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub source_id: String,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        Ok(Self { samples, sample_rate, source_id: source_id.into() })
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

    pub fn peak(&self) -> f64 {
        peak_abs(&self.samples)
    }
}

pub(crate) fn peak_abs(samples: &[f64]) -> f64 {
    samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    Pcm16,
    #[default]
    Float32,
}

/// Outcome of a write. `clipped` counts samples whose magnitude exceeded
/// full scale on the 16-bit path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WriteReport {
    pub clipped: usize,
}

pub fn read_wave(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let wav_err = |source| match source {
        hound::Error::Unsupported => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: "codec not supported".into(),
        },
        source => Error::Wav { path: path.to_path_buf(), source },
    };

    let mut reader = WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedFormat { path: path.into(), detail: "zero channels".into() });
    }
    if channels > 1 {
        warn!("{}: {} channels, keeping channel 0", path.display(), channels);
    }

    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .step_by(channels)
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .step_by(channels)
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (format, bits) => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                detail: format!("{bits}-bit {format:?}"),
            })
        }
    };
    if samples.is_empty() {
        return Err(Error::EmptyData { path: path.into() });
    }

    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Waveform::new(samples, spec.sample_rate, source_id)
}

pub fn write_wave(wave: &Waveform, path: impl AsRef<Path>, depth: BitDepth) -> Result<WriteReport> {
    let path = path.as_ref();
    if let Some(index) = wave.samples.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteSample { index });
    }
    if wave.sample_rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }

    let spec = match depth {
        BitDepth::Pcm16 => WavSpec {
            channels: 1,
            sample_rate: wave.sample_rate,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        },
        BitDepth::Float32 => WavSpec {
            channels: 1,
            sample_rate: wave.sample_rate,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        },
    };
    let wav_err = |source| Error::Wav { path: path.to_path_buf(), source };

    let mut report = WriteReport::default();
    let mut writer = WavWriter::create(path, spec).map_err(wav_err)?;
    match depth {
        BitDepth::Pcm16 => {
            for &s in &wave.samples {
                if s.abs() > 1.0 {
                    report.clipped += 1;
                }
                let q = (s * PCM16_SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64);
                writer.write_sample(q as i16).map_err(wav_err)?;
            }
        }
        BitDepth::Float32 => {
            for &s in &wave.samples {
                writer.write_sample(s as f32).map_err(wav_err)?;
            }
        }
    }
    writer.finalize().map_err(wav_err)?;
    Ok(report)
}
