use num_complex::Complex;

use super::fft::Fft;
use super::mel::MelFilterbank;
use crate::audio::AudioBlock;
use crate::error::{Error, Result};

pub const N_MFCC: usize = 16;
/// Fractional bits of the fixed-point coefficients (Q8.8 scale).
pub const MFCC_FRAC_BITS: u32 = 8;
pub const MFCC_ONE: i32 = 1 << MFCC_FRAC_BITS;
/// Floor applied to Mel energies before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;

/// Sixteen cepstral coefficients with eight fractional bits.
///
/// Stored in `i32` so the silent-block coefficient 0 (about -130) and loud
/// blocks fit without saturation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MfccVector {
    pub coeffs: [i32; N_MFCC],
}

impl MfccVector {
    pub fn from_f32(values: &[f32; N_MFCC]) -> Self {
        let mut coeffs = [0i32; N_MFCC];
        for (c, &v) in coeffs.iter_mut().zip(values) {
            *c = (v * MFCC_ONE as f32).round() as i32;
        }
        Self { coeffs }
    }

    pub fn from_f64(values: &[f64; N_MFCC]) -> Self {
        Self {
            coeffs: values.map(|v| (v * f64::from(MFCC_ONE)).round() as i32),
        }
    }

    pub fn value(&self, i: usize) -> f32 {
        self.coeffs[i] as f32 / MFCC_ONE as f32
    }

    pub fn to_f32(&self) -> [f32; N_MFCC] {
        std::array::from_fn(|i| self.value(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rect,
    Hann,
}

impl Window {
    /// Periodic window coefficients.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Magnitude spectrum of a block in PCM units, `block_size / 2 + 1` bins.
pub fn fft_magnitude(block: &AudioBlock, window: Window) -> Result<Vec<f64>> {
    magnitude_spectrum(&block.samples, window)
}

pub fn magnitude_spectrum(samples: &[i16], window: Window) -> Result<Vec<f64>> {
    let fft = Fft::<f64>::new(samples.len())?;
    let w = window.coefficients(samples.len());
    let x: Vec<f64> = samples.iter().zip(&w).map(|(&s, w)| f64::from(s) * w).collect();
    Ok(fft.real_forward(&x).iter().map(|c| c.norm()).collect())
}

/// MFCC front end matching the filterbank's geometry.
///
/// Samples are scaled to [-1, 1), Hann windowed, transformed, reduced to
/// Mel band powers, floored, log'd (base e) and passed through an
/// orthonormal DCT-II; the first 16 coefficients are rounded to Q8.8.
/// Work is done in `f64`: in `f32` the FFT round-off swamps the quantization
/// noise floor of far-off bands on loud tonal blocks and shifts the upper
/// coefficients by several Q8.8 steps.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    fb: MelFilterbank,
    fft: Fft<f64>,
    /// Hann window with the 1/32768 sample scaling folded in.
    window: Vec<f64>,
    dct: Vec<f64>,
}

impl MfccExtractor {
    pub fn new(fb: MelFilterbank) -> Result<Self> {
        if fb.n_filters < N_MFCC {
            return Err(Error::Dsp(format!(
                "{} mel filters cannot yield {N_MFCC} coefficients",
                fb.n_filters
            )));
        }
        let n = fb.fft_size;
        let fft = Fft::new(n)?;
        let window = Window::Hann
            .coefficients(n)
            .into_iter()
            .map(|w| w / 32768.0)
            .collect();
        let m = fb.n_filters;
        let mut dct = Vec::with_capacity(N_MFCC * m);
        for k in 0..N_MFCC {
            let scale = if k == 0 { (1.0 / m as f64).sqrt() } else { (2.0 / m as f64).sqrt() };
            for i in 0..m {
                let angle = std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * m) as f64;
                dct.push(scale * angle.cos());
            }
        }
        Ok(Self { fb, fft, window, dct })
    }

    pub fn standard(block_size: usize, sample_rate: u32) -> Result<Self> {
        Self::new(MelFilterbank::standard(block_size, sample_rate)?)
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.fb
    }

    /// Floating coefficients before rounding to fixed point.
    pub fn coefficients(&self, samples: &[i16]) -> Result<[f64; N_MFCC]> {
        if samples.len() != self.fb.fft_size {
            return Err(Error::Dsp(format!(
                "block of {} samples does not match the {}-point filterbank",
                samples.len(),
                self.fb.fft_size
            )));
        }
        let mut buf: Vec<Complex<f64>> = samples
            .iter()
            .zip(&self.window)
            .map(|(&s, &w)| Complex::new(f64::from(s) * w, 0.0))
            .collect();
        self.fft.process(&mut buf);
        let power: Vec<f64> = buf[..self.fb.n_bins()].iter().map(|c| c.norm_sqr()).collect();
        let log_energy: Vec<f64> = self
            .fb
            .apply(&power)
            .into_iter()
            .map(|e| e.max(LOG_FLOOR).ln())
            .collect();
        let m = self.fb.n_filters;
        Ok(std::array::from_fn(|k| {
            self.dct[k * m..(k + 1) * m]
                .iter()
                .zip(&log_energy)
                .map(|(a, b)| a * b)
                .sum()
        }))
    }

    pub fn compute(&self, samples: &[i16]) -> Result<MfccVector> {
        Ok(MfccVector::from_f64(&self.coefficients(samples)?))
    }

    pub fn block(&self, block: &AudioBlock) -> Result<MfccVector> {
        self.compute(&block.samples)
    }
}

/// One-shot MFCC of a block.
pub fn mfcc(block: &AudioBlock, fb: &MelFilterbank) -> Result<MfccVector> {
    if fb.sample_rate != block.sample_rate {
        return Err(Error::Dsp(format!(
            "filterbank built for {} Hz, block is {} Hz",
            fb.sample_rate, block.sample_rate
        )));
    }
    MfccExtractor::new(fb.clone())?.block(block)
}
