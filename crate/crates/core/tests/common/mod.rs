//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the crate's own numerics.

#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::PI;

use tinybird_core::corpus::Corpus;
use tinybird_core::dsp::MfccVector;
use tinybird_core::tinyml::Models;

pub const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/model.tbm");

pub fn fixture_models() -> Models {
    let bytes = std::fs::read(FIXTURE).expect("fixture present");
    Models::from_bytes(&bytes).expect("fixture loads").0
}

/// O(n^2) DFT.
pub fn naive_dft(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = re.len();
    let mut out_re = vec![0.0; n];
    let mut out_im = vec![0.0; n];
    for k in 0..n {
        for t in 0..n {
            // reduce the index first so the angle stays small
            let a = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
            let (s, c) = a.sin_cos();
            out_re[k] += re[t] * c - im[t] * s;
            out_im[k] += re[t] * s + im[t] * c;
        }
    }
    (out_re, out_im)
}

fn mel(hz: f64) -> f64 {
    1127.0 * (1.0 + hz / 700.0).ln()
}

fn inv_mel(m: f64) -> f64 {
    700.0 * ((m / 1127.0).exp() - 1.0)
}

/// Double-precision MFCC: periodic Hann, DFT power, 32 triangular HTK-mel
/// filters on [250, 8000] Hz normalized to unit sum, log floor 1e-10,
/// orthonormal DCT-II, 16 coefficients.
pub fn reference_mfcc(samples: &[i16], sample_rate: f64) -> [f64; 16] {
    const FILTERS: usize = 32;
    let n = samples.len();
    let x: Vec<f64> = samples
        .iter()
        .enumerate()
        .map(|(i, &s)| f64::from(s) / 32768.0 * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()))
        .collect();
    let (re, im) = naive_dft(&x, &vec![0.0; n]);
    let bins = n / 2 + 1;
    let power: Vec<f64> = (0..bins).map(|k| re[k] * re[k] + im[k] * im[k]).collect();

    let (lo, hi) = (mel(250.0), mel(8000.0f64.min(sample_rate / 2.0)));
    let edges: Vec<f64> = (0..FILTERS + 2)
        .map(|i| inv_mel(lo + (hi - lo) * i as f64 / (FILTERS + 1) as f64))
        .collect();
    let mut log_e = [0.0; FILTERS];
    for m in 0..FILTERS {
        let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
        let w: Vec<f64> = (0..bins)
            .map(|k| {
                let f = k as f64 * sample_rate / n as f64;
                if f > l && f <= c {
                    (f - l) / (c - l)
                } else if f > c && f < r {
                    (r - f) / (r - c)
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        let e: f64 = w.iter().zip(&power).map(|(a, b)| a * b).sum::<f64>() / total;
        log_e[m] = e.max(1e-10).ln();
    }
    std::array::from_fn(|k| {
        let norm = if k == 0 { (1.0 / FILTERS as f64).sqrt() } else { (2.0 / FILTERS as f64).sqrt() };
        norm * (0..FILTERS)
            .map(|i| log_e[i] * (PI * k as f64 * (i as f64 + 0.5) / FILTERS as f64).cos())
            .sum::<f64>()
    })
}

/// Edit distance by memoized top-down recursion over suffixes.
pub fn edit_distance_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Float forward pass of the classifier on dequantized parameters, with
/// unquantized input and activations.
pub struct FloatClassifier {
    conv_w: Vec<f64>,
    conv_b: Vec<f64>,
    fc_w: Vec<f64>,
    fc_b: Vec<f64>,
}

impl FloatClassifier {
    pub fn new(models: &Models) -> Self {
        let c = &models.classifier;
        let deq = |data: &[i8], scale: f32| data.iter().map(|&q| f64::from(q) * f64::from(scale)).collect();
        let conv_scale = f64::from(c.input.scale) * f64::from(c.conv_weights.params.scale);
        let fc_scale = f64::from(c.conv_output.scale) * f64::from(c.fc_weights.params.scale);
        Self {
            conv_w: deq(&c.conv_weights.data, c.conv_weights.params.scale),
            conv_b: c.conv_bias.iter().map(|&b| f64::from(b) * conv_scale).collect(),
            fc_w: deq(&c.fc_weights.data, c.fc_weights.params.scale),
            fc_b: c.fc_bias.iter().map(|&b| f64::from(b) * fc_scale).collect(),
        }
    }

    pub fn logits(&self, blocks: &[[f64; 16]; 3]) -> [f64; 8] {
        let mut act = [0.0; 128];
        for f in 0..8 {
            for p in 0..16 {
                let mut z = self.conv_b[f];
                for (b, block) in blocks.iter().enumerate() {
                    for k in 0..3 {
                        let c = p as i64 + k as i64 - 1;
                        if (0..16).contains(&c) {
                            z += self.conv_w[(f * 3 + b) * 3 + k] * block[c as usize];
                        }
                    }
                }
                act[f * 16 + p] = z.max(0.0);
            }
        }
        std::array::from_fn(|c| self.fc_b[c] + (0..128).map(|j| self.fc_w[c * 128 + j] * act[j]).sum::<f64>())
    }

    pub fn argmax(&self, blocks: &[[f64; 16]; 3]) -> usize {
        let l = self.logits(blocks);
        (0..8).fold(0, |best, c| if l[c] > l[best] { c } else { best })
    }
}

pub fn as_f64(v: &MfccVector) -> [f64; 16] {
    v.to_f32().map(f64::from)
}

/// Ground-truth events as inclusive block ranges.
pub fn gt_blocks(corpus: &Corpus, block_size: usize) -> Vec<(u64, u64, u8)> {
    corpus
        .events
        .iter()
        .map(|e| {
            (
                (e.onset_sample / block_size) as u64,
                ((e.offset_sample - 1) / block_size) as u64,
                e.label,
            )
        })
        .collect()
}

pub fn report(name: &str, pass: bool, detail: &str) -> bool {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
