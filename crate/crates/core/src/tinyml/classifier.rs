use super::tensor::{FixedMultiplier, QuantParams, QuantizedTensor};
use crate::dsp::{MfccVector, N_MFCC};
use crate::error::{Error, Result};

pub const N_CLASSES: usize = 8;
pub const N_SELECTED_BLOCKS: usize = 3;
pub const CONV_FILTERS: usize = 8;
/// Kernel width along the coefficient axis; the kernel spans all three blocks.
pub const CONV_KERNEL: usize = 3;
pub const INPUT_LEN: usize = N_SELECTED_BLOCKS * N_MFCC;
/// Same padding keeps one output per coefficient.
pub const CONV_OUT_LEN: usize = CONV_FILTERS * N_MFCC;
pub const SCRATCH_BYTES: usize = 1200;
pub const CLASSIFIER_FLASH_BUDGET: usize = 2700;

/// Static work memory for one forward pass.
#[derive(Debug, Clone)]
pub struct ScratchBuffer {
    bytes: [i8; SCRATCH_BYTES],
    peak: usize,
}

impl Default for ScratchBuffer {
    fn default() -> Self {
        Self {
            bytes: [0; SCRATCH_BYTES],
            peak: 0,
        }
    }
}

impl ScratchBuffer {
    /// Largest number of bytes any forward pass has held at once.
    pub fn peak_usage(&self) -> usize {
        self.peak
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub probs: [f64; N_CLASSES],
    pub label: u8,
}

/// Three MFCC blocks -> conv (8 x 3 x 3, same padding along coefficients)
/// -> ReLU -> fully connected (8 x 128) -> softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub input: QuantParams,
    /// `[8, 3, 3]`: filter, block, coefficient offset.
    pub conv_weights: QuantizedTensor,
    pub conv_bias: Vec<i32>,
    /// Post-ReLU activations.
    pub conv_output: QuantParams,
    /// `[8, 128]`, input index `filter * 16 + coefficient`.
    pub fc_weights: QuantizedTensor,
    pub fc_bias: Vec<i32>,
    requant: FixedMultiplier,
}

impl ClassifierModel {
    pub fn new(
        input: QuantParams,
        conv_weights: QuantizedTensor,
        conv_bias: Vec<i32>,
        conv_output: QuantParams,
        fc_weights: QuantizedTensor,
        fc_bias: Vec<i32>,
    ) -> Result<Self> {
        if conv_weights.shape != [CONV_FILTERS, N_SELECTED_BLOCKS, CONV_KERNEL] {
            return Err(Error::Model(format!(
                "conv weights must be [{CONV_FILTERS}, {N_SELECTED_BLOCKS}, {CONV_KERNEL}], got {:?}",
                conv_weights.shape
            )));
        }
        if conv_bias.len() != CONV_FILTERS {
            return Err(Error::Model(format!("conv bias needs {CONV_FILTERS} values")));
        }
        if fc_weights.shape != [N_CLASSES, CONV_OUT_LEN] {
            return Err(Error::Model(format!(
                "fc weights must be [{N_CLASSES}, {CONV_OUT_LEN}], got {:?}",
                fc_weights.shape
            )));
        }
        if fc_bias.len() != N_CLASSES {
            return Err(Error::Model(format!("fc bias needs {N_CLASSES} values")));
        }
        if conv_weights.params.zero_point != 0 || fc_weights.params.zero_point != 0 {
            return Err(Error::Model("classifier weights must be symmetric".into()));
        }
        let real = f64::from(input.scale) * f64::from(conv_weights.params.scale)
            / f64::from(conv_output.scale);
        let requant = FixedMultiplier::from_real(real)?;
        Ok(Self {
            input,
            conv_weights,
            conv_bias,
            conv_output,
            fc_weights,
            fc_bias,
            requant,
        })
    }

    /// Parameter bytes as stored in flash.
    pub fn parameter_bytes(&self) -> usize {
        self.conv_weights.len() + 4 * self.conv_bias.len() + self.fc_weights.len() + 4 * self.fc_bias.len()
    }

    pub fn conv_accumulator_scale(&self) -> f32 {
        self.input.scale * self.conv_weights.params.scale
    }

    pub fn fc_accumulator_scale(&self) -> f32 {
        self.conv_output.scale * self.fc_weights.params.scale
    }

    /// Int8 forward pass returning the dequantized logits.
    pub fn logits(&self, blocks: &[MfccVector; N_SELECTED_BLOCKS], scratch: &mut ScratchBuffer) -> [f32; N_CLASSES] {
        let (input, rest) = scratch.bytes.split_at_mut(INPUT_LEN);
        let act = &mut rest[..CONV_OUT_LEN];
        // i32 accumulators for the logits live alongside
        let used = INPUT_LEN + CONV_OUT_LEN + N_CLASSES * 4;
        scratch.peak = scratch.peak.max(used);

        for (b, v) in blocks.iter().enumerate() {
            for (c, x) in v.to_f32().iter().enumerate() {
                input[b * N_MFCC + c] = self.input.quantize(*x);
            }
        }

        let in_zp = i32::from(self.input.zero_point);
        let out_zp = i32::from(self.conv_output.zero_point);
        let w = &self.conv_weights.data;
        for f in 0..CONV_FILTERS {
            for p in 0..N_MFCC {
                let mut acc = self.conv_bias[f];
                for b in 0..N_SELECTED_BLOCKS {
                    for k in 0..CONV_KERNEL {
                        let c = p + k;
                        // padded positions hold the input zero point
                        if c == 0 || c > N_MFCC {
                            continue;
                        }
                        let x = i32::from(input[b * N_MFCC + c - 1]) - in_zp;
                        acc += i32::from(w[(f * N_SELECTED_BLOCKS + b) * CONV_KERNEL + k]) * x;
                    }
                }
                let q = self.requant.apply(acc) + out_zp;
                act[f * N_MFCC + p] = q.clamp(out_zp, 127) as i8;
            }
        }

        let mut acc = [0i32; N_CLASSES];
        for (c, a) in acc.iter_mut().enumerate() {
            let row = &self.fc_weights.data[c * CONV_OUT_LEN..(c + 1) * CONV_OUT_LEN];
            *a = row
                .iter()
                .zip(act.iter())
                .fold(self.fc_bias[c], |s, (&w, &x)| s + i32::from(w) * (i32::from(x) - out_zp));
        }
        let scale = self.fc_accumulator_scale();
        acc.map(|a| a as f32 * scale)
    }

    pub fn classify(&self, blocks: &[MfccVector; N_SELECTED_BLOCKS], scratch: &mut ScratchBuffer) -> Classification {
        let logits = self.logits(blocks, scratch);
        let probs = softmax(&logits);
        Classification {
            label: argmax(&probs) as u8,
            probs,
        }
    }
}

pub fn softmax(logits: &[f32; N_CLASSES]) -> [f64; N_CLASSES] {
    let max = logits.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.map(|l| f64::from(l - max).exp());
    let sum: f64 = exp.iter().sum();
    exp.map(|e| e / sum)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn classify(
    blocks: &[MfccVector],
    model: &ClassifierModel,
    scratch: &mut ScratchBuffer,
) -> Result<Classification> {
    let blocks: &[MfccVector; N_SELECTED_BLOCKS] = blocks.try_into().map_err(|_| {
        Error::Model(format!("classifier needs {N_SELECTED_BLOCKS} blocks, got {}", blocks.len()))
    })?;
    Ok(model.classify(blocks, scratch))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_fc_model() -> ClassifierModel {
        let conv = QuantizedTensor::quantize_symmetric(vec![8, 3, 3], &[0.1; 72]).unwrap();
        let fc = QuantizedTensor::quantize_symmetric(vec![8, 128], &[0.0; 1024]).unwrap();
        ClassifierModel::new(
            QuantParams::from_range(-150.0, 50.0),
            conv,
            vec![0; 8],
            QuantParams::from_range(0.0, 40.0),
            fc,
            vec![0; 8],
        )
        .unwrap()
    }

    #[test]
    fn zero_logits_are_uniform() {
        let m = zero_fc_model();
        let mut scratch = ScratchBuffer::default();
        let mut v = MfccVector::default();
        v.coeffs[3] = 900;
        let out = classify(&[v, v, v], &m, &mut scratch).unwrap();
        assert!(out.probs.iter().all(|&p| (p - 0.125).abs() < 1e-12));
        assert_eq!(out.label, 0);
        assert!(scratch.peak_usage() <= SCRATCH_BYTES);
    }

    #[test]
    fn wrong_block_count() {
        let m = zero_fc_model();
        let v = MfccVector::default();
        assert!(classify(&[v, v], &m, &mut ScratchBuffer::default()).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.5; 8]), 0);
    }

    #[test]
    fn topology_fits_budgets() {
        let m = zero_fc_model();
        assert_eq!(m.parameter_bytes(), 72 + 32 + 1024 + 32);
        assert!(m.parameter_bytes() <= CLASSIFIER_FLASH_BUDGET);
        let mut scratch = ScratchBuffer::default();
        m.classify(&[MfccVector::default(); 3], &mut scratch);
        assert_eq!(scratch.peak_usage(), 48 + 128 + 32);
    }

    #[test]
    fn softmax_handles_extremes() {
        let p = softmax(&[1000.0, -1000.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(argmax(&p), 0);
    }
}
