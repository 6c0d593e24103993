use crate::error::{Error, Result};

pub const DEFAULT_N_FILTERS: usize = 32;
pub const DEFAULT_F_MIN: f64 = 250.0;
pub const DEFAULT_F_MAX: f64 = 8000.0;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular Mel filters over the non-negative FFT bins.
///
/// Filter edges are equally spaced on the HTK Mel scale; each row is scaled
/// to sum to one so a flat spectrum maps to equal band energies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub n_filters: usize,
    pub fft_size: usize,
    pub sample_rate: u32,
    pub f_min: f64,
    pub f_max: f64,
    edges_hz: Vec<f64>,
    /// Row-major, `n_filters x (fft_size / 2 + 1)`.
    weights: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(n_filters: usize, fft_size: usize, sample_rate: u32, f_min: f64, f_max: f64) -> Result<Self> {
        if n_filters == 0 {
            return Err(Error::Dsp("filterbank needs at least one filter".into()));
        }
        if !fft_size.is_power_of_two() || fft_size < 2 {
            return Err(Error::Dsp(format!("fft size {fft_size} is not a power of two")));
        }
        let nyquist = f64::from(sample_rate) / 2.0;
        if !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
            return Err(Error::Dsp(format!(
                "frequency range [{f_min}, {f_max}] Hz invalid for {sample_rate} Hz"
            )));
        }
        let lo = hz_to_mel(f_min);
        let hi = hz_to_mel(f_max);
        let mut edges_hz: Vec<f64> = (0..n_filters + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_filters + 1) as f64))
            .collect();
        // pin the outer edges against round-off in the mel round trip
        edges_hz[0] = f_min;
        edges_hz[n_filters + 1] = f_max;
        let bins = fft_size / 2 + 1;
        let bin_hz = f64::from(sample_rate) / fft_size as f64;
        let mut weights = Vec::with_capacity(n_filters * bins);
        for m in 0..n_filters {
            let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
            let row: Vec<f64> = (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f > left && f <= center {
                        (f - left) / (center - left)
                    } else if f > center && f < right {
                        (right - f) / (right - center)
                    } else {
                        0.0
                    }
                })
                .collect();
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(Error::Dsp(format!(
                    "mel filter {m} ({left:.1}-{right:.1} Hz) covers no fft bin; use a larger fft"
                )));
            }
            weights.extend(row.iter().map(|w| w / sum));
        }
        Ok(Self {
            n_filters,
            fft_size,
            sample_rate,
            f_min,
            f_max,
            edges_hz,
            weights,
        })
    }

    /// 32 filters over 250-8000 Hz.
    pub fn standard(fft_size: usize, sample_rate: u32) -> Result<Self> {
        Self::new(
            DEFAULT_N_FILTERS,
            fft_size,
            sample_rate,
            DEFAULT_F_MIN,
            DEFAULT_F_MAX.min(f64::from(sample_rate) / 2.0),
        )
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn row(&self, m: usize) -> &[f64] {
        let bins = self.n_bins();
        &self.weights[m * bins..(m + 1) * bins]
    }

    /// Closed frequency support `(left, right)` of filter `m`, Hz.
    pub fn support(&self, m: usize) -> (f64, f64) {
        (self.edges_hz[m], self.edges_hz[m + 2])
    }

    pub fn center(&self, m: usize) -> f64 {
        self.edges_hz[m + 1]
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        (0..self.n_filters)
            .map(|m| self.row(m).iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}
