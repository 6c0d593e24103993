use crate::error::{Error, Result};

/// Affine quantization parameters: `real = scale * (q - zero_point)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    pub scale: f32,
    pub zero_point: i8,
}

impl QuantParams {
    pub fn new(scale: f32, zero_point: i8) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Model(format!("scale must be positive and finite, got {scale}")));
        }
        Ok(Self { scale, zero_point })
    }

    /// Asymmetric parameters covering `[min, max]` (widened to include zero).
    pub fn from_range(min: f32, max: f32) -> Self {
        let lo = min.min(0.0);
        let hi = max.max(0.0);
        if hi - lo <= 0.0 {
            return Self { scale: 1.0, zero_point: 0 };
        }
        let scale = (hi - lo) / 255.0;
        let zero_point = (-128.0 - lo / scale).round().clamp(-128.0, 127.0) as i8;
        Self { scale, zero_point }
    }

    /// Symmetric parameters (zero point 0) for values up to `max_abs`.
    /// All-zero data gets scale 1.
    pub fn symmetric(max_abs: f32) -> Self {
        let scale = if max_abs > 0.0 { max_abs / 127.0 } else { 1.0 };
        Self { scale, zero_point: 0 }
    }

    pub fn quantize(&self, x: f32) -> i8 {
        let q = (x / self.scale).round() + f32::from(self.zero_point);
        q.clamp(-128.0, 127.0) as i8
    }

    pub fn dequantize(&self, q: i8) -> f32 {
        self.scale * (i32::from(q) - i32::from(self.zero_point)) as f32
    }

    /// Real values representable without clamping.
    pub fn range(&self) -> (f32, f32) {
        (self.dequantize(-128), self.dequantize(127))
    }
}

/// An int8 tensor with one scale and zero point.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub shape: Vec<usize>,
    pub data: Vec<i8>,
    pub params: QuantParams,
}

impl QuantizedTensor {
    pub fn new(shape: Vec<usize>, data: Vec<i8>, params: QuantParams) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Model(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data, params })
    }

    /// Symmetric per-tensor quantization of float weights.
    pub fn quantize_symmetric(shape: Vec<usize>, values: &[f32]) -> Result<Self> {
        let max_abs = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
        let params = QuantParams::symmetric(max_abs);
        let data = values.iter().map(|&v| params.quantize(v)).collect();
        Self::new(shape, data, params)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dequantized(&self) -> Vec<f32> {
        self.data.iter().map(|&q| self.params.dequantize(q)).collect()
    }
}

/// Quantizes a bias to int32 at the accumulator scale `input_scale * weight_scale`.
pub fn quantize_bias(values: &[f32], accumulator_scale: f32) -> Vec<i32> {
    values
        .iter()
        .map(|&b| (f64::from(b) / f64::from(accumulator_scale)).round() as i32)
        .collect()
}

/// A real multiplier in `(0, 1)` as a Q31 mantissa and a right shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixedMultiplier {
    pub mantissa: i32,
    pub shift: u32,
}

impl FixedMultiplier {
    pub fn from_real(real: f64) -> Result<Self> {
        if !(real > 0.0 && real < 1.0) {
            return Err(Error::Model(format!("requantization multiplier {real} outside (0, 1)")));
        }
        let mut shift = 0u32;
        let mut m = real;
        while m < 0.5 {
            m *= 2.0;
            shift += 1;
        }
        let mut mantissa = (m * f64::from(1u32 << 31)).round() as i64;
        if mantissa == 1i64 << 31 {
            if shift == 0 {
                mantissa = i64::from(i32::MAX);
            } else {
                mantissa /= 2;
                shift -= 1;
            }
        }
        if shift > 31 {
            // the product underflows to zero anyway
            return Ok(Self { mantissa: 0, shift: 0 });
        }
        Ok(Self {
            mantissa: mantissa as i32,
            shift,
        })
    }

    /// `round(acc * real)`, ties away from zero.
    pub fn apply(&self, acc: i32) -> i32 {
        let total = 31 + self.shift;
        let prod = i64::from(acc) * i64::from(self.mantissa);
        let half = 1i64 << (total - 1);
        let rounded = if prod >= 0 {
            (prod + half) >> total
        } else {
            -((-prod + half) >> total)
        };
        rounded as i32
    }

    pub fn as_real(&self) -> f64 {
        f64::from(self.mantissa) / f64::from(1u32 << 31) / f64::from(1u32 << self.shift.min(31))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_weights_get_unit_scale() {
        let t = QuantizedTensor::quantize_symmetric(vec![2, 2], &[0.0; 4]).unwrap();
        assert_eq!(t.params.scale, 1.0);
        assert!(t.data.iter().all(|&q| q == 0));
    }

    #[test]
    fn shape_mismatch() {
        assert!(QuantizedTensor::new(vec![2, 3], vec![0; 5], QuantParams::symmetric(1.0)).is_err());
        assert!(QuantParams::new(0.0, 0).is_err());
        assert!(QuantParams::new(f32::NAN, 0).is_err());
    }

    #[test]
    fn multiplier_matches_real_product() {
        for &real in &[0.5, 0.75, 1e-3, 0.0123, 0.999_999_9] {
            let m = FixedMultiplier::from_real(real).unwrap();
            assert!((m.as_real() - real).abs() / real < 1e-8, "{real}");
            for acc in [-100_000, -3, 0, 7, 12345, 2_000_000] {
                let expected = (f64::from(acc) * real).round();
                assert!((f64::from(m.apply(acc)) - expected).abs() <= 1.0, "{real} {acc}");
            }
        }
        assert!(FixedMultiplier::from_real(1.5).is_err());
        assert!(FixedMultiplier::from_real(0.0).is_err());
    }

    proptest! {
        #[test]
        fn quantization_error_bounded(min in -50.0f32..0.0, span in 0.01f32..100.0, t in 0.0f32..1.0) {
            let p = QuantParams::from_range(min, min + span);
            let (lo, hi) = p.range();
            let x = lo + (hi - lo) * t;
            let err = (p.dequantize(p.quantize(x)) - x).abs();
            prop_assert!(err <= p.scale / 2.0 + p.scale * 1e-4, "err {} scale {}", err, p.scale);
        }

        #[test]
        fn quantize_dequantize_idempotent(scale in 1e-3f32..10.0, zp in any::<i8>(), q in any::<i8>()) {
            let p = QuantParams::new(scale, zp).unwrap();
            prop_assert_eq!(p.quantize(p.dequantize(q)), q);
        }
    }
}
