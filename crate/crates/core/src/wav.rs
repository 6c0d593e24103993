//! 16-bit mono PCM WAV files.

use std::io::{Read, Seek, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WavAudio {
    pub sample_rate: u32,
    pub samples: Vec<i16>,
}

impl WavAudio {
    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

fn wav_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Wav(other.to_string()),
    }
}

pub fn read_wav_from<R: Read>(reader: R) -> Result<WavAudio> {
    let r = hound::WavReader::new(reader).map_err(wav_err)?;
    let spec = r.spec();
    if spec.channels != 1 {
        return Err(Error::Wav(format!("expected mono, got {} channels", spec.channels)));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Wav(format!(
            "expected 16-bit integer PCM, got {} bits {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples = r.into_samples::<i16>().collect::<std::result::Result<Vec<_>, _>>().map_err(wav_err)?;
    Ok(WavAudio {
        sample_rate: spec.sample_rate,
        samples,
    })
}

pub fn read_wav(path: &Path) -> Result<WavAudio> {
    let file = std::fs::File::open(path)?;
    read_wav_from(std::io::BufReader::new(file))
        .map_err(|e| match e {
            Error::Wav(msg) => Error::Wav(format!("{}: {msg}", path.display())),
            other => other,
        })
}

pub fn write_wav_to<W: Write + Seek>(writer: W, samples: &[i16], sample_rate: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::new(writer, spec).map_err(wav_err)?;
    let mut i16w = w.get_i16_writer(samples.len() as u32);
    for &s in samples {
        i16w.write_sample(s);
    }
    i16w.flush().map_err(wav_err)?;
    w.finalize().map_err(wav_err)
}

pub fn write_wav(path: &Path, samples: &[i16], sample_rate: u32) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_wav_to(std::io::BufWriter::new(file), samples, sample_rate)
}

pub fn wav_bytes(samples: &[i16], sample_rate: u32) -> Result<Vec<u8>> {
    let mut cur = std::io::Cursor::new(Vec::new());
    write_wav_to(&mut cur, samples, sample_rate)?;
    Ok(cur.into_inner())
}

/// Linear-interpolation resampling. Adequate for bringing recordings to the
/// node rate; it does not low-pass before decimating.
pub fn resample_linear(samples: &[i16], from_rate: u32, to_rate: u32) -> Result<Vec<i16>> {
    if from_rate == 0 || to_rate == 0 {
        return Err(Error::Config("sample rates must be positive".into()));
    }
    if from_rate == to_rate || samples.is_empty() {
        return Ok(samples.to_vec());
    }
    let out_len = (samples.len() as u64 * u64::from(to_rate)).div_ceil(u64::from(from_rate)) as usize;
    let step = f64::from(from_rate) / f64::from(to_rate);
    let last = samples.len() - 1;
    Ok((0..out_len)
        .map(|i| {
            let pos = i as f64 * step;
            let j = (pos.floor() as usize).min(last);
            let frac = pos - j as f64;
            let a = f64::from(samples[j]);
            let b = f64::from(samples[(j + 1).min(last)]);
            (a + (b - a) * frac).round().clamp(-32768.0, 32767.0) as i16
        })
        .collect())
}

/// Reads a WAV and brings it to `rate`, resampling only when allowed.
pub fn read_wav_at(path: &Path, rate: u32, allow_resample: bool) -> Result<Vec<i16>> {
    let wav = read_wav(path)?;
    if wav.sample_rate == rate {
        return Ok(wav.samples);
    }
    if !allow_resample {
        return Err(Error::Wav(format!(
            "{}: sample rate {} Hz, expected {rate} Hz (pass --resample to convert)",
            path.display(),
            wav.sample_rate
        )));
    }
    resample_linear(&wav.samples, wav.sample_rate, rate)
}
