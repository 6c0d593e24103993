use std::io::Write;
use std::path::Path;

use super::fft::Fft;
use super::mfcc::Window;
use crate::error::{Error, Result};

pub const DB_FLOOR: f64 = -80.0;

/// Short-time magnitude spectrum in dB relative to a full-scale sine's
/// window gain, floored at -80 dB.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub sample_rate: u32,
    pub block_size: usize,
    pub hop: usize,
    pub n_bins: usize,
    pub n_frames: usize,
    /// Row-major, rows are frequency bins.
    pub db: Vec<f64>,
}

impl Spectrogram {
    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.db[bin * self.n_frames + frame]
    }

    pub fn frame(&self, frame: usize) -> Vec<f64> {
        (0..self.n_bins).map(|b| self.get(b, frame)).collect()
    }

    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * f64::from(self.sample_rate) / self.block_size as f64
    }

    pub fn frame_secs(&self, frame: usize) -> f64 {
        (frame * self.hop) as f64 / f64::from(self.sample_rate)
    }

    /// Strongest bin of each frame.
    pub fn ridge(&self) -> Vec<usize> {
        (0..self.n_frames)
            .map(|f| {
                (0..self.n_bins)
                    .max_by(|&a, &b| self.get(a, f).total_cmp(&self.get(b, f)))
                    .unwrap_or(0)
            })
            .collect()
    }

    /// CSV with a `freq_hz` column followed by one column per frame start time.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "freq_hz")?;
        for f in 0..self.n_frames {
            write!(out, ",{:.4}", self.frame_secs(f))?;
        }
        writeln!(out)?;
        for b in 0..self.n_bins {
            write!(out, "{:.2}", self.bin_hz(b))?;
            for f in 0..self.n_frames {
                write!(out, ",{:.2}", self.get(b, f))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Grayscale PNG, one pixel per (frame, bin), low frequencies at the bottom.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        let img = image::GrayImage::from_fn(self.n_frames as u32, self.n_bins as u32, |x, y| {
            let bin = self.n_bins - 1 - y as usize;
            let v = (self.get(bin, x as usize) - DB_FLOOR) / -DB_FLOOR;
            image::Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8])
        });
        img.save(path).map_err(|e| Error::Dsp(format!("cannot write {}: {e}", path.display())))
    }
}

pub fn spectrogram(pcm: &[i16], sample_rate: u32, block_size: usize, hop: usize) -> Result<Spectrogram> {
    if hop == 0 || hop > block_size {
        return Err(Error::Dsp(format!("hop {hop} must be in 1..={block_size}")));
    }
    let fft = Fft::<f64>::new(block_size)?;
    let window = Window::Hann.coefficients(block_size);
    let reference = 32768.0 * window.iter().sum::<f64>() / 2.0;
    let n_frames = if pcm.len() <= block_size {
        1
    } else {
        1 + (pcm.len() - block_size).div_ceil(hop)
    };
    let n_bins = block_size / 2 + 1;
    let mut db = vec![DB_FLOOR; n_bins * n_frames];
    let mut frame = vec![0.0f64; block_size];
    for f in 0..n_frames {
        let start = f * hop;
        for (i, v) in frame.iter_mut().enumerate() {
            *v = pcm.get(start + i).map_or(0.0, |&s| f64::from(s)) * window[i];
        }
        for (b, c) in fft.real_forward(&frame).iter().enumerate() {
            let mag = c.norm() / reference;
            let level = if mag > 0.0 { 20.0 * mag.log10() } else { DB_FLOOR };
            db[b * n_frames + f] = level.max(DB_FLOOR);
        }
    }
    Ok(Spectrogram {
        sample_rate,
        block_size,
        hop,
        n_bins,
        n_frames,
        db,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_is_floor() {
        let s = spectrogram(&vec![0; 4000], 16_000, 256, 128).unwrap();
        assert!(s.db.iter().all(|&v| v == DB_FLOOR));
        assert_eq!(s.n_frames, 1 + (4000 - 256usize).div_ceil(128));
    }

    #[test]
    fn short_input_single_frame() {
        let s = spectrogram(&[100; 10], 16_000, 256, 256).unwrap();
        assert_eq!(s.n_frames, 1);
        assert!(spectrogram(&[0; 10], 16_000, 256, 512).is_err());
    }

    #[test]
    fn full_scale_sine_near_zero_db() {
        let pcm: Vec<i16> = (0..256)
            .map(|i| (32767.0 * (2.0 * std::f64::consts::PI * 16.0 * i as f64 / 256.0).sin()) as i16)
            .collect();
        let s = spectrogram(&pcm, 16_000, 256, 256).unwrap();
        assert!(s.get(16, 0).abs() < 0.01, "{}", s.get(16, 0));
    }

    #[test]
    fn chirp_ridge_rises() {
        let sr = 16_000.0;
        let dur = 1.0;
        let (f0, f1) = (1000.0, 7000.0);
        let pcm: Vec<i16> = (0..(sr * dur) as usize)
            .map(|i| {
                let t = i as f64 / sr;
                let phase = 2.0 * std::f64::consts::PI * (f0 * t + (f1 - f0) * t * t / (2.0 * dur));
                (12000.0 * phase.sin()) as i16
            })
            .collect();
        let s = spectrogram(&pcm, 16_000, 256, 128).unwrap();
        let ridge = s.ridge();
        assert!(ridge.windows(2).all(|w| w[1] >= w[0]), "{ridge:?}");
        assert!(ridge[0] <= 18 && *ridge.last().unwrap() >= 108);
    }

    #[test]
    fn csv_shape() {
        let s = spectrogram(&vec![0; 512], 16_000, 256, 256).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 129);
        assert_eq!(lines[0], "freq_hz,0.0000,0.0160");
        assert!(lines[1].starts_with("0.00,-80.00,-80.00"));
    }
}
