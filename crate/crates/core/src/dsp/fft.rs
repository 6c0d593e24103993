//! In-place iterative radix-2 FFT.

use num_complex::Complex;
use num_traits::{Float, FloatConst, NumCast};

use crate::error::{Error, Result};

/// Precomputed twiddles and bit-reversal permutation for one transform size.
#[derive(Debug, Clone)]
pub struct Fft<T> {
    n: usize,
    twiddles: Vec<Complex<T>>,
    bitrev: Vec<usize>,
}

impl<T: Float + FloatConst> Fft<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Dsp(format!("fft size {n} is not a power of two >= 2")));
        }
        // twiddles are computed in f64 so the f32 transform only rounds once
        let twiddles = (0..n / 2)
            .map(|k| {
                let angle = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex::new(cast(angle.cos()), cast(angle.sin()))
            })
            .collect();
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| i.reverse_bits() >> (usize::BITS - bits))
            .collect();
        Ok(Self { n, twiddles, bitrev })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Forward transform, no normalization.
    pub fn process(&self, buf: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.n, "buffer length must match the fft size");
        for i in 0..self.n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// Transform of a real signal; returns the `n / 2 + 1` non-negative-frequency bins.
    pub fn real_forward(&self, input: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = input.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.process(&mut buf);
        buf.truncate(self.n / 2 + 1);
        buf
    }
}

fn cast<T: NumCast>(x: f64) -> T {
    T::from(x).expect("finite twiddle")
}
