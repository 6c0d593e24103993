use super::tensor::{QuantParams, QuantizedTensor};
use crate::dsp::{MfccVector, N_MFCC};
use crate::error::{Error, Result};

pub const DEFAULT_DETECTOR_THRESHOLD: f32 = 0.5;

/// Single-layer perceptron over one block's MFCCs.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub input: QuantParams,
    /// `[1, 16]`, symmetric.
    pub weights: QuantizedTensor,
    /// At the accumulator scale `input.scale * weights.scale`.
    pub bias: i32,
    pub threshold: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub score: f32,
    pub is_syllable: bool,
}

pub fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

impl DetectorModel {
    pub fn new(input: QuantParams, weights: QuantizedTensor, bias: i32, threshold: f32) -> Result<Self> {
        if weights.shape != [1, N_MFCC] {
            return Err(Error::Model(format!(
                "detector weights must be [1, {N_MFCC}], got {:?}",
                weights.shape
            )));
        }
        if weights.params.zero_point != 0 {
            return Err(Error::Model("detector weights must be symmetric".into()));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Model(format!("detector threshold {threshold} outside (0, 1)")));
        }
        Ok(Self {
            input,
            weights,
            bias,
            threshold,
        })
    }

    pub fn accumulator_scale(&self) -> f32 {
        self.input.scale * self.weights.params.scale
    }

    /// Integer dot product plus bias, before dequantization.
    pub fn accumulate(&self, mfcc: &MfccVector) -> i32 {
        let zp = i32::from(self.input.zero_point);
        mfcc.to_f32()
            .iter()
            .zip(&self.weights.data)
            .fold(self.bias, |acc, (&x, &w)| {
                acc + i32::from(w) * (i32::from(self.input.quantize(x)) - zp)
            })
    }

    pub fn detect(&self, mfcc: &MfccVector) -> Detection {
        let logit = self.accumulate(mfcc) as f32 * self.accumulator_scale();
        let score = sigmoid(logit);
        Detection {
            score,
            is_syllable: score >= self.threshold,
        }
    }
}

pub fn detect(mfcc: &MfccVector, model: &DetectorModel) -> Detection {
    model.detect(mfcc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_scores_one_half() {
        let weights = QuantizedTensor::quantize_symmetric(vec![1, 16], &[0.0; 16]).unwrap();
        let m = DetectorModel::new(QuantParams::from_range(-10.0, 10.0), weights, 0, 0.5).unwrap();
        let mut v = MfccVector::default();
        v.coeffs[0] = -3000;
        v.coeffs[7] = 1234;
        let d = m.detect(&v);
        assert_eq!(d.score, 0.5);
        assert!(d.is_syllable);
    }

    #[test]
    fn shape_is_checked() {
        let weights = QuantizedTensor::quantize_symmetric(vec![1, 15], &[0.0; 15]).unwrap();
        assert!(DetectorModel::new(QuantParams::symmetric(1.0), weights, 0, 0.5).is_err());
        let weights = QuantizedTensor::quantize_symmetric(vec![1, 16], &[0.0; 16]).unwrap();
        assert!(DetectorModel::new(QuantParams::symmetric(1.0), weights, 0, 1.0).is_err());
    }
}
