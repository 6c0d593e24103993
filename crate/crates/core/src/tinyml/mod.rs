//! Int8 inference for the two-stage syllable network and its weight file.
//!
//! Weights are symmetric per-tensor int8, activations asymmetric int8, and
//! accumulators int32. The conv layer requantizes through a fixed-point
//! multiplier; detector and classifier logits are dequantized for the final
//! sigmoid or softmax.

mod classifier;
mod detector;
mod format;
mod tensor;

use std::path::Path;

pub use classifier::{
    argmax, classify, softmax, Classification, ClassifierModel, ScratchBuffer,
    CLASSIFIER_FLASH_BUDGET, CONV_FILTERS, CONV_KERNEL, CONV_OUT_LEN, INPUT_LEN, N_CLASSES,
    N_SELECTED_BLOCKS, SCRATCH_BYTES,
};
pub use detector::{detect, sigmoid, Detection, DetectorModel, DEFAULT_DETECTOR_THRESHOLD};
pub use format::{DType, TbmFile, TbmTensor, TensorData, TBM_MAGIC, TBM_VERSION};
pub use tensor::{quantize_bias, FixedMultiplier, QuantParams, QuantizedTensor};

use crate::error::{Error, Result};

pub const DETECTOR_FLASH_BUDGET: usize = 1200;

/// Tensor names in a `.tbm` file.
pub mod names {
    pub const DET_INPUT: &str = "det.in";
    pub const DET_WEIGHTS: &str = "det.w";
    pub const DET_BIAS: &str = "det.b";
    pub const CLS_INPUT: &str = "cls.in";
    pub const CLS_CONV_WEIGHTS: &str = "cls.conv.w";
    pub const CLS_CONV_BIAS: &str = "cls.conv.b";
    pub const CLS_CONV_OUTPUT: &str = "cls.conv.out";
    pub const CLS_FC_WEIGHTS: &str = "cls.fc.w";
    pub const CLS_FC_BIAS: &str = "cls.fc.b";

    pub const ALL: [&str; 9] = [
        DET_INPUT,
        DET_WEIGHTS,
        DET_BIAS,
        CLS_INPUT,
        CLS_CONV_WEIGHTS,
        CLS_CONV_BIAS,
        CLS_CONV_OUTPUT,
        CLS_FC_WEIGHTS,
        CLS_FC_BIAS,
    ];
}

/// Both stages of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub detector: DetectorModel,
    pub classifier: ClassifierModel,
}

/// Memory figures and non-fatal findings from loading a weight file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadReport {
    pub detector_flash_bytes: usize,
    pub classifier_flash_bytes: usize,
    pub classifier_scratch_bytes: usize,
    pub warnings: Vec<String>,
}

fn tensor<'a>(file: &'a TbmFile, name: &str) -> Result<&'a TbmTensor> {
    file.get(name)
        .ok_or_else(|| Error::Model(format!("tensor '{name}' missing")))
}

fn params(t: &TbmTensor) -> Result<QuantParams> {
    QuantParams::new(t.scale, t.zero_point).map_err(|e| Error::Model(format!("tensor '{}': {e}", t.name)))
}

/// Quantization parameters carried by a data-less `[0]` tensor.
fn activation(file: &TbmFile, name: &str) -> Result<QuantParams> {
    let t = tensor(file, name)?;
    if t.element_count() != 0 || t.data.dtype() != DType::Int8 {
        return Err(Error::Model(format!("tensor '{name}' must be an empty int8 parameter holder")));
    }
    params(t)
}

fn int8(file: &TbmFile, name: &str, shape: &[usize]) -> Result<QuantizedTensor> {
    let t = tensor(file, name)?;
    let actual: Vec<usize> = t.shape.iter().map(|&d| usize::from(d)).collect();
    if actual != shape {
        return Err(Error::Model(format!("tensor '{name}': expected shape {shape:?}, got {actual:?}")));
    }
    let TensorData::Int8(data) = &t.data else {
        return Err(Error::Model(format!("tensor '{name}' must be int8")));
    };
    let p = params(t)?;
    if p.zero_point != 0 {
        return Err(Error::Model(format!("tensor '{name}': weights must have zero point 0")));
    }
    QuantizedTensor::new(actual, data.clone(), p)
}

fn bias(file: &TbmFile, name: &str, len: usize, expected_scale: f32) -> Result<Vec<i32>> {
    let t = tensor(file, name)?;
    if t.shape != [len as u16] {
        return Err(Error::Model(format!("tensor '{name}': expected shape [{len}], got {:?}", t.shape)));
    }
    let TensorData::Int32(data) = &t.data else {
        return Err(Error::Model(format!("tensor '{name}' must be int32")));
    };
    let p = params(t)?;
    if p.zero_point != 0 {
        return Err(Error::Model(format!("tensor '{name}': bias must have zero point 0")));
    }
    if ((p.scale - expected_scale) / expected_scale).abs() > 1e-4 {
        return Err(Error::Model(format!(
            "tensor '{name}': scale {} differs from the accumulator scale {expected_scale}",
            p.scale
        )));
    }
    Ok(data.clone())
}

impl Models {
    pub fn from_tbm(file: &TbmFile) -> Result<(Self, LoadReport)> {
        use names::*;
        let det_in = activation(file, DET_INPUT)?;
        let det_w = int8(file, DET_WEIGHTS, &[1, crate::dsp::N_MFCC])?;
        let det_b = bias(file, DET_BIAS, 1, det_in.scale * det_w.params.scale)?;
        let detector = DetectorModel::new(det_in, det_w, det_b[0], DEFAULT_DETECTOR_THRESHOLD)?;

        let cls_in = activation(file, CLS_INPUT)?;
        let conv_w = int8(file, CLS_CONV_WEIGHTS, &[CONV_FILTERS, N_SELECTED_BLOCKS, CONV_KERNEL])?;
        let conv_b = bias(file, CLS_CONV_BIAS, CONV_FILTERS, cls_in.scale * conv_w.params.scale)?;
        let conv_out = activation(file, CLS_CONV_OUTPUT)?;
        let fc_w = int8(file, CLS_FC_WEIGHTS, &[N_CLASSES, CONV_OUT_LEN])?;
        let fc_b = bias(file, CLS_FC_BIAS, N_CLASSES, conv_out.scale * fc_w.params.scale)?;
        let classifier = ClassifierModel::new(cls_in, conv_w, conv_b, conv_out, fc_w, fc_b)?;

        let footprint = |prefix: &str| -> usize {
            file.tensors
                .iter()
                .filter(|t| t.name.starts_with(prefix))
                .map(TbmTensor::footprint)
                .sum()
        };
        let mut report = LoadReport {
            detector_flash_bytes: footprint("det."),
            classifier_flash_bytes: footprint("cls."),
            classifier_scratch_bytes: INPUT_LEN + CONV_OUT_LEN + N_CLASSES * 4,
            warnings: Vec::new(),
        };
        for t in &file.tensors {
            if !names::ALL.contains(&t.name.as_str()) {
                report.warnings.push(format!("unused tensor '{}'", t.name));
            }
        }
        if report.classifier_flash_bytes > CLASSIFIER_FLASH_BUDGET {
            report.warnings.push(format!(
                "classifier needs {} bytes of flash, budget is {CLASSIFIER_FLASH_BUDGET}",
                report.classifier_flash_bytes
            ));
        }
        if report.detector_flash_bytes > DETECTOR_FLASH_BUDGET {
            report.warnings.push(format!(
                "detector needs {} bytes of flash, budget is {DETECTOR_FLASH_BUDGET}",
                report.detector_flash_bytes
            ));
        }
        if report.classifier_scratch_bytes > SCRATCH_BYTES {
            report.warnings.push(format!(
                "classifier needs {} bytes of scratch, budget is {SCRATCH_BYTES}",
                report.classifier_scratch_bytes
            ));
        }
        for w in &report.warnings {
            log::warn!("{w}");
        }
        Ok((Self { detector, classifier }, report))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, LoadReport)> {
        Self::from_tbm(&TbmFile::from_bytes(bytes)?)
    }

    pub fn to_tbm(&self) -> TbmFile {
        use names::*;
        let holder = |name: &str, p: QuantParams| TbmTensor {
            name: name.into(),
            shape: vec![0],
            scale: p.scale,
            zero_point: p.zero_point,
            data: TensorData::Int8(Vec::new()),
        };
        let weights = |name: &str, t: &QuantizedTensor| TbmTensor {
            name: name.into(),
            shape: t.shape.iter().map(|&d| d as u16).collect(),
            scale: t.params.scale,
            zero_point: 0,
            data: TensorData::Int8(t.data.clone()),
        };
        let bias = |name: &str, b: &[i32], scale: f32| TbmTensor {
            name: name.into(),
            shape: vec![b.len() as u16],
            scale,
            zero_point: 0,
            data: TensorData::Int32(b.to_vec()),
        };
        let d = &self.detector;
        let c = &self.classifier;
        TbmFile {
            tensors: vec![
                holder(DET_INPUT, d.input),
                weights(DET_WEIGHTS, &d.weights),
                bias(DET_BIAS, &[d.bias], d.accumulator_scale()),
                holder(CLS_INPUT, c.input),
                weights(CLS_CONV_WEIGHTS, &c.conv_weights),
                bias(CLS_CONV_BIAS, &c.conv_bias, c.conv_accumulator_scale()),
                holder(CLS_CONV_OUTPUT, c.conv_output),
                weights(CLS_FC_WEIGHTS, &c.fc_weights),
                bias(CLS_FC_BIAS, &c.fc_bias, c.fc_accumulator_scale()),
            ],
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.to_tbm().to_bytes()
    }
}

/// Reads and validates a `.tbm` file. Nothing is returned unless every
/// tensor checks out.
pub fn load_model(path: &Path) -> Result<(Models, LoadReport)> {
    let bytes = std::fs::read(path)?;
    Models::from_bytes(&bytes).map_err(|e| match e {
        Error::Model(msg) => Error::Model(format!("{}: {msg}", path.display())),
        other => other,
    })
}
