//! Trains the detector and classifier on synthetic corpora and writes the
//! quantized `.tbm` used by the test suite.
//!
//! ```text
//! cargo run --release -p tinybird-core --example train_fixture -- [out.tbm]
//! ```
//!
//! Everything is seeded, so the output is byte-identical across runs on the
//! same platform.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tinybird_core::audio::{frame_signal, DEFAULT_BLOCK_SIZE, DEFAULT_SAMPLE_RATE};
use tinybird_core::corpus::{generate, Corpus, CorpusConfig};
use tinybird_core::dsp::{MfccExtractor, N_MFCC};
use tinybird_core::pipeline::{run_pipeline, segment, select_blocks, syllable_error_rate, PipelineConfig};
use tinybird_core::tinyml::{
    quantize_bias, ClassifierModel, DetectorModel, Models, QuantParams, QuantizedTensor, CONV_FILTERS,
    CONV_KERNEL, CONV_OUT_LEN, DEFAULT_DETECTOR_THRESHOLD, N_CLASSES, N_SELECTED_BLOCKS,
};

const BLOCK: usize = DEFAULT_BLOCK_SIZE;
const TRAIN_SETS: [(u64, usize, f64); 2] = [(7, 200, 20.0), (8, 150, 25.0)];
const HELD_OUT: (u64, usize, f64) = (1001, 100, 20.0);
/// A block is a training positive when its clean syllable RMS reaches this.
const POSITIVE_RMS: f64 = 400.0;
const MAX_FALSE_POSITIVE: f64 = 0.001;
const INPUT_TAIL: f64 = 0.0005;
const ACT_TAIL: f64 = 0.0001;

type Features = [f32; N_MFCC];

struct Prepared {
    corpus: Corpus,
    features: Vec<Features>,
    /// Syllable RMS per block before noise.
    clean_rms: Vec<f64>,
}

fn prepare(seed: u64, motifs: usize, snr: f64, ex: &MfccExtractor) -> Prepared {
    let corpus = generate(&CorpusConfig::new(seed, motifs, snr)).unwrap();
    let clean = generate(&CorpusConfig::new(seed, motifs, f64::INFINITY)).unwrap();
    let features = frame_signal(&corpus.samples, BLOCK, DEFAULT_SAMPLE_RATE)
        .unwrap()
        .iter()
        .map(|b| ex.block(b).unwrap().to_f32())
        .collect();
    let clean_rms = frame_signal(&clean.samples, BLOCK, DEFAULT_SAMPLE_RATE)
        .unwrap()
        .iter()
        .map(|b| b.rms())
        .collect();
    Prepared {
        corpus,
        features,
        clean_rms,
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

fn train_detector(sets: &[Prepared]) -> (Vec<f64>, f64) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in sets {
        for (f, &r) in s.features.iter().zip(&s.clean_rms) {
            let label = if r >= POSITIVE_RMS {
                1.0
            } else if r == 0.0 {
                0.0
            } else {
                continue;
            };
            xs.push(f.map(f64::from));
            ys.push(label);
        }
    }
    let n = xs.len() as f64;
    let mean: Vec<f64> = (0..N_MFCC).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..N_MFCC)
        .map(|j| (xs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt().max(1e-6))
        .collect();

    // weights then bias, on standardized features
    let mut p = vec![0.0; N_MFCC + 1];
    let mut opt = Adam::new(p.len(), 0.05);
    for _ in 0..600 {
        let mut g = vec![0.0; p.len()];
        for (x, &y) in xs.iter().zip(&ys) {
            let z: f64 = p[N_MFCC] + (0..N_MFCC).map(|j| p[j] * (x[j] - mean[j]) / std[j]).sum::<f64>();
            let err = 1.0 / (1.0 + (-z).exp()) - y;
            for j in 0..N_MFCC {
                g[j] += err * (x[j] - mean[j]) / std[j] / n;
            }
            g[N_MFCC] += err / n;
        }
        opt.step(&mut p, &g);
    }
    let w: Vec<f64> = (0..N_MFCC).map(|j| p[j] / std[j]).collect();
    let mut b = p[N_MFCC] - (0..N_MFCC).map(|j| w[j] * mean[j]).sum::<f64>();

    // Every stray positive in silence becomes a one-block syllable, so move
    // the operating point until almost no noise block fires.
    let mut neg: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .filter(|(_, &y)| y == 0.0)
        .map(|(x, _)| b + (0..N_MFCC).map(|j| w[j] * x[j]).sum::<f64>())
        .collect();
    neg.sort_by(f64::total_cmp);
    let quantile = neg[((neg.len() as f64) * (1.0 - MAX_FALSE_POSITIVE)) as usize];
    if quantile > 0.0 {
        b -= quantile;
    }
    let correct = xs
        .iter()
        .zip(&ys)
        .filter(|(x, &y)| {
            let z = b + (0..N_MFCC).map(|j| w[j] * x[j]).sum::<f64>();
            (z >= 0.0) == (y == 1.0)
        })
        .count();
    eprintln!("detector: {} blocks, float accuracy {:.4}", xs.len(), correct as f64 / n);
    (w, b)
}

/// Calibration range: clip the rare extremes so the bulk keeps resolution.
fn quantile_range(mut values: Vec<f32>, tail: f64) -> (f32, f32) {
    values.sort_by(f32::total_cmp);
    let at = |q: f64| values[((values.len() - 1) as f64 * q).round() as usize];
    (at(tail), at(1.0 - tail))
}

fn input_range(sets: &[Prepared]) -> (f32, f32) {
    let all: Vec<f32> = sets.iter().flat_map(|s| s.features.iter().flatten().copied()).collect();
    quantile_range(all, INPUT_TAIL)
}

fn quantize_detector(w: &[f64], b: f64, input: QuantParams) -> DetectorModel {
    let wf: Vec<f32> = w.iter().map(|&v| v as f32).collect();
    let weights = QuantizedTensor::quantize_symmetric(vec![1, N_MFCC], &wf).unwrap();
    let bias = quantize_bias(&[b as f32], input.scale * weights.params.scale)[0];
    DetectorModel::new(input, weights, bias, DEFAULT_DETECTOR_THRESHOLD).unwrap()
}

fn gt_blocks(corpus: &Corpus) -> Vec<(u64, u64, u8)> {
    corpus
        .events
        .iter()
        .map(|e| {
            (
                (e.onset_sample / BLOCK) as u64,
                ((e.offset_sample - 1) / BLOCK) as u64,
                e.label,
            )
        })
        .collect()
}

type Sample = ([f64; N_SELECTED_BLOCKS * N_MFCC], usize);

fn sample_for(features: &[Features], onset: u64, offset: u64, label: u8) -> Sample {
    let mut x = [0.0; N_SELECTED_BLOCKS * N_MFCC];
    for (b, idx) in select_blocks(onset, offset).iter().enumerate() {
        for c in 0..N_MFCC {
            x[b * N_MFCC + c] = f64::from(features[*idx as usize][c]);
        }
    }
    (x, usize::from(label))
}

fn classifier_samples(s: &Prepared, det: &DetectorModel) -> Vec<Sample> {
    let last = s.features.len() as i64 - 1;
    let mut out = Vec::new();
    let gt = gt_blocks(&s.corpus);
    for &(on, off, label) in &gt {
        for d_on in -1i64..=1 {
            for d_off in -1i64..=1 {
                let a = (on as i64 + d_on).clamp(0, last);
                let b = (off as i64 + d_off).clamp(0, last);
                if a <= b {
                    out.push(sample_for(&s.features, a as u64, b as u64, label));
                }
            }
        }
    }
    // segments as the quantized detector actually finds them
    let decisions: Vec<bool> = s
        .features
        .iter()
        .map(|f| det.detect(&tinybird_core::dsp::MfccVector::from_f32(f)).is_syllable)
        .collect();
    for (on, off) in segment(&decisions, 1, 1).unwrap() {
        let hit = gt.iter().filter(|g| g.0 <= off && on <= g.1).collect::<Vec<_>>();
        if let [g] = hit.as_slice() {
            out.push(sample_for(&s.features, on, off, g.2));
        }
    }
    out
}

const N_CONV: usize = CONV_FILTERS * N_SELECTED_BLOCKS * CONV_KERNEL;
const N_FC: usize = N_CLASSES * CONV_OUT_LEN;
// parameter vector layout: conv w | conv b | fc w | fc b
const P_CONV_B: usize = N_CONV;
const P_FC_W: usize = P_CONV_B + CONV_FILTERS;
const P_FC_B: usize = P_FC_W + N_FC;
const N_PARAMS: usize = P_FC_B + N_CLASSES;

fn input_at(x: &[f64], b: usize, c: i64) -> f64 {
    if c < 0 || c >= N_MFCC as i64 {
        0.0
    } else {
        x[b * N_MFCC + c as usize]
    }
}

fn conv_forward(p: &[f64], x: &[f64]) -> [f64; CONV_OUT_LEN] {
    let mut z = [0.0; CONV_OUT_LEN];
    for f in 0..CONV_FILTERS {
        for pos in 0..N_MFCC {
            let mut acc = p[P_CONV_B + f];
            for b in 0..N_SELECTED_BLOCKS {
                for k in 0..CONV_KERNEL {
                    acc += p[(f * N_SELECTED_BLOCKS + b) * CONV_KERNEL + k] * input_at(x, b, pos as i64 + k as i64 - 1);
                }
            }
            z[f * N_MFCC + pos] = acc;
        }
    }
    z
}

fn fc_forward(p: &[f64], a: &[f64; CONV_OUT_LEN]) -> [f64; N_CLASSES] {
    std::array::from_fn(|c| {
        p[P_FC_B + c]
            + (0..CONV_OUT_LEN)
                .map(|j| p[P_FC_W + c * CONV_OUT_LEN + j] * a[j])
                .sum::<f64>()
    })
}

fn softmax(l: &[f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = l.map(|v| (v - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

fn predict(p: &[f64], x: &[f64]) -> usize {
    let a = conv_forward(p, x).map(|v| v.max(0.0));
    let l = fc_forward(p, &a);
    (0..N_CLASSES).fold(0, |best, c| if l[c] > l[best] { c } else { best })
}

fn train_classifier(samples: &mut [Sample], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut p = vec![0.0; N_PARAMS];
    let conv_scale = (1.0 / (N_SELECTED_BLOCKS * CONV_KERNEL) as f64).sqrt() * 0.1;
    let fc_scale = (1.0 / CONV_OUT_LEN as f64).sqrt();
    for v in &mut p[..N_CONV] {
        *v = rng.random_range(-conv_scale..conv_scale);
    }
    for v in &mut p[P_FC_W..P_FC_B] {
        *v = rng.random_range(-fc_scale..fc_scale);
    }
    let mut opt = Adam::new(N_PARAMS, 0.003);
    const BATCH: usize = 64;
    const EPOCHS: usize = 80;
    const L2: f64 = 1e-4;
    for epoch in 0..EPOCHS {
        samples.shuffle(rng);
        let mut loss = 0.0;
        for batch in samples.chunks(BATCH) {
            let mut g = vec![0.0; N_PARAMS];
            for (x, y) in batch {
                let z = conv_forward(&p, x);
                let a = z.map(|v| v.max(0.0));
                let prob = softmax(&fc_forward(&p, &a));
                loss -= prob[*y].max(1e-12).ln();
                let mut da = [0.0; CONV_OUT_LEN];
                for c in 0..N_CLASSES {
                    let dl = prob[c] - if c == *y { 1.0 } else { 0.0 };
                    g[P_FC_B + c] += dl;
                    for j in 0..CONV_OUT_LEN {
                        g[P_FC_W + c * CONV_OUT_LEN + j] += dl * a[j];
                        da[j] += dl * p[P_FC_W + c * CONV_OUT_LEN + j];
                    }
                }
                for f in 0..CONV_FILTERS {
                    for pos in 0..N_MFCC {
                        let j = f * N_MFCC + pos;
                        if z[j] <= 0.0 {
                            continue;
                        }
                        g[P_CONV_B + f] += da[j];
                        for b in 0..N_SELECTED_BLOCKS {
                            for k in 0..CONV_KERNEL {
                                g[(f * N_SELECTED_BLOCKS + b) * CONV_KERNEL + k] +=
                                    da[j] * input_at(x, b, pos as i64 + k as i64 - 1);
                            }
                        }
                    }
                }
            }
            let n = batch.len() as f64;
            for (i, gi) in g.iter_mut().enumerate() {
                *gi = *gi / n + L2 * p[i];
            }
            opt.step(&mut p, &g);
        }
        if epoch % 10 == 9 {
            let acc = samples.iter().filter(|(x, y)| predict(&p, x) == *y).count() as f64 / samples.len() as f64;
            eprintln!("classifier epoch {}: loss {:.4}, accuracy {acc:.4}", epoch + 1, loss / samples.len() as f64);
        }
    }
    p
}

fn quantize_classifier(p: &[f64], input: QuantParams, calib: &[Sample]) -> ClassifierModel {
    let f32s = |r: &[f64]| r.iter().map(|&v| v as f32).collect::<Vec<_>>();
    let conv_w =
        QuantizedTensor::quantize_symmetric(vec![CONV_FILTERS, N_SELECTED_BLOCKS, CONV_KERNEL], &f32s(&p[..N_CONV]))
            .unwrap();
    let conv_b = quantize_bias(&f32s(&p[P_CONV_B..P_FC_W]), input.scale * conv_w.params.scale);
    let acts: Vec<f32> = calib
        .iter()
        .flat_map(|(x, _)| conv_forward(p, x))
        .filter(|&v| v > 0.0)
        .map(|v| v as f32)
        .collect();
    let (_, max_act) = quantile_range(acts, ACT_TAIL);
    let conv_out = QuantParams::from_range(0.0, max_act);
    let fc_w = QuantizedTensor::quantize_symmetric(vec![N_CLASSES, CONV_OUT_LEN], &f32s(&p[P_FC_W..P_FC_B])).unwrap();
    let fc_b = quantize_bias(&f32s(&p[P_FC_B..]), conv_out.scale * fc_w.params.scale);
    ClassifierModel::new(input, conv_w, conv_b, conv_out, fc_w, fc_b).unwrap()
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/model.tbm")));
    let ex = MfccExtractor::standard(BLOCK, DEFAULT_SAMPLE_RATE).unwrap();
    let sets: Vec<Prepared> = TRAIN_SETS
        .iter()
        .map(|&(seed, motifs, snr)| prepare(seed, motifs, snr, &ex))
        .collect();

    let (lo, hi) = input_range(&sets);
    let input = QuantParams::from_range(lo, hi);
    eprintln!("input range [{lo:.2}, {hi:.2}], scale {:.4}, zero point {}", input.scale, input.zero_point);

    let (w, b) = train_detector(&sets);
    let detector = quantize_detector(&w, b, input);

    let mut samples: Vec<Sample> = sets.iter().flat_map(|s| classifier_samples(s, &detector)).collect();
    eprintln!("classifier: {} training segments", samples.len());
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let params = train_classifier(&mut samples, &mut rng);
    let classifier = quantize_classifier(&params, input, &samples);

    let models = Models { detector, classifier };
    let bytes = models.to_bytes().unwrap();
    let (reloaded, report) = Models::from_bytes(&bytes).unwrap();
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    std::fs::write(&out, &bytes).unwrap();
    eprintln!(
        "wrote {} ({} bytes; detector {} B, classifier {} B flash)",
        out.display(),
        bytes.len(),
        report.detector_flash_bytes,
        report.classifier_flash_bytes
    );

    let (seed, motifs, snr) = HELD_OUT;
    let held = generate(&CorpusConfig::new(seed, motifs, snr)).unwrap();
    let result = run_pipeline(&held.samples, &reloaded, &PipelineConfig::default()).unwrap();
    let predicted: Vec<u8> = result.events.iter().map(|e| e.label).collect();
    let ser = syllable_error_rate(&predicted, &held.labels()).unwrap();
    let gt = gt_blocks(&held);
    let within = gt
        .iter()
        .filter(|g| {
            result.events.iter().any(|e| {
                e.onset_block.abs_diff(g.0) <= 1 && e.offset_block.abs_diff(g.1) <= 1
            })
        })
        .count();
    let mut per_class = [(0usize, 0usize); N_CLASSES];
    for g in &gt {
        let ok = result
            .events
            .iter()
            .any(|e| e.onset_block.abs_diff(g.0) <= 1 && e.offset_block.abs_diff(g.1) <= 1);
        per_class[usize::from(g.2)].0 += usize::from(ok);
        per_class[usize::from(g.2)].1 += 1;
    }
    eprintln!("boundaries per class: {per_class:?}");
    let stray: Vec<u64> = result
        .events
        .iter()
        .filter(|e| !gt.iter().any(|g| g.0 <= e.offset_block && e.onset_block <= g.1))
        .map(|e| e.duration_blocks())
        .collect();
    eprintln!("events outside any syllable: {} (durations {:?})", stray.len(), stray);
    eprintln!(
        "held-out: {} syllables, {} events, SER {:.4}, boundaries within one block {:.4}",
        gt.len(),
        result.events.len(),
        ser,
        within as f64 / gt.len() as f64
    );
}
