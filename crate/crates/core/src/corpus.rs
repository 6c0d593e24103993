//! Seeded synthetic song corpus: eight harmonic syllable classes arranged in
//! motifs, with exact ground-truth segmentation.
//!
//! The syllables are harmonic stacks with class-specific fundamentals, sweeps
//! and amplitude envelopes. They are easy to tell apart and make no claim to
//! sound like a real bird.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::audio::DEFAULT_SAMPLE_RATE;
use crate::error::{Error, Result};
use crate::pipeline::EventRecord;
use crate::tinyml::N_CLASSES;

/// RMS of every syllable before noise is added.
pub const SYLLABLE_RMS: f64 = 4000.0;
const MOTIF_LEN: (usize, usize) = (4, 6);
const GAP_MS: (f64, f64) = (24.0, 100.0);
const SHORT_GAP_MS: (f64, f64) = (5.0, 24.0);
const SHORT_GAP_PROB: f64 = 0.03;
const MOTIF_SILENCE_MS: (f64, f64) = (150.0, 400.0);
const EDGE_SILENCE_MS: f64 = 200.0;
const F0_JITTER: f64 = 0.03;
const NOISE_STREAM: u64 = u64::MAX;

/// Amplitude shape of a syllable. Every shape stays well above zero inside
/// the syllable and is faded in and out over [`EDGE_TAPER_MS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Envelope {
    Arch,
    Pluck,
    Swell,
    Flat,
    DoubleBump,
    Tremolo,
    Decay,
    TripleBump,
}

pub const EDGE_TAPER_MS: f64 = 4.0;

impl Envelope {
    /// Gain at relative position `t` in [0, 1] of a syllable lasting `secs`.
    pub fn gain(self, t: f64, secs: f64) -> f64 {
        let shape = match self {
            Envelope::Arch => 0.35 + 0.65 * (PI * t).sin(),
            Envelope::Pluck => 0.3 + 0.7 * (-3.0 * t).exp(),
            Envelope::Swell => 0.35 + 0.65 * t,
            Envelope::Flat => 1.0,
            Envelope::DoubleBump => 0.75 - 0.25 * (4.0 * PI * t).cos(),
            Envelope::Tremolo => 0.7 + 0.3 * (2.0 * PI * 40.0 * t * secs).cos(),
            Envelope::Decay => 1.0 - 0.65 * t,
            Envelope::TripleBump => 0.75 - 0.25 * (6.0 * PI * t).cos(),
        };
        let edge_secs = (t.min(1.0 - t) * secs).max(0.0);
        let taper = (edge_secs * 1000.0 / EDGE_TAPER_MS).min(1.0);
        shape * (0.5 - 0.5 * (PI * taper).cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyllableTemplate {
    pub class: u8,
    pub f0_hz: f64,
    /// Relative sweep of the fundamental from onset to offset.
    pub sweep: f64,
    /// Amplitude of harmonic `k + 1`. Harmonics near Nyquist are dropped.
    pub harmonic_weights: [f64; 8],
    pub duration_ms: (f64, f64),
    pub envelope: Envelope,
}

pub const TEMPLATES: [SyllableTemplate; N_CLASSES] = [
    SyllableTemplate {
        class: 0,
        f0_hz: 550.0,
        sweep: 0.0,
        harmonic_weights: [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3],
        duration_ms: (40.0, 90.0),
        envelope: Envelope::Arch,
    },
    SyllableTemplate {
        class: 1,
        f0_hz: 800.0,
        sweep: 0.10,
        harmonic_weights: [0.3, 1.0, 0.3, 0.8, 0.2, 0.6, 0.1, 0.4],
        duration_ms: (60.0, 140.0),
        envelope: Envelope::Pluck,
    },
    SyllableTemplate {
        class: 2,
        f0_hz: 1150.0,
        sweep: -0.10,
        harmonic_weights: [1.0, 0.2, 0.7, 0.2, 0.5, 0.2, 0.3, 0.0],
        duration_ms: (80.0, 200.0),
        envelope: Envelope::Swell,
    },
    SyllableTemplate {
        class: 3,
        f0_hz: 1600.0,
        sweep: 0.05,
        harmonic_weights: [1.0, 0.7, 0.5, 0.35, 0.0, 0.0, 0.0, 0.0],
        duration_ms: (120.0, 260.0),
        envelope: Envelope::Flat,
    },
    SyllableTemplate {
        class: 4,
        f0_hz: 2200.0,
        sweep: 0.15,
        harmonic_weights: [0.6, 1.0, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0],
        duration_ms: (50.0, 110.0),
        envelope: Envelope::DoubleBump,
    },
    SyllableTemplate {
        class: 5,
        f0_hz: 3000.0,
        sweep: -0.05,
        harmonic_weights: [1.0, 0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        duration_ms: (150.0, 300.0),
        envelope: Envelope::Tremolo,
    },
    SyllableTemplate {
        class: 6,
        f0_hz: 4100.0,
        sweep: 0.0,
        harmonic_weights: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        duration_ms: (30.0, 70.0),
        envelope: Envelope::Decay,
    },
    SyllableTemplate {
        class: 7,
        f0_hz: 5600.0,
        sweep: 0.08,
        harmonic_weights: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        duration_ms: (90.0, 180.0),
        envelope: Envelope::TripleBump,
    },
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusConfig {
    pub seed: u64,
    pub n_motifs: usize,
    /// `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub sample_rate: u32,
}

impl CorpusConfig {
    pub fn new(seed: u64, n_motifs: usize, snr_db: f64) -> Self {
        Self {
            seed,
            n_motifs,
            snr_db,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

/// A syllable in sample units; `offset_sample` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusEvent {
    pub onset_sample: usize,
    pub offset_sample: usize,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sample_rate: u32,
    pub samples: Vec<i16>,
    pub events: Vec<CorpusEvent>,
}

fn ms_to_samples(ms: f64, rate: u32) -> usize {
    (ms * f64::from(rate) / 1000.0).round() as usize
}

/// Renders one syllable of `template` at unit RMS.
pub fn render_syllable<R: Rng>(template: &SyllableTemplate, rng: &mut R, sample_rate: u32) -> Vec<f64> {
    let sr = f64::from(sample_rate);
    let (lo, hi) = template.duration_ms;
    let secs = rng.random_range(lo..=hi) / 1000.0;
    let n = ((secs * sr).round() as usize).max(2);
    let f0 = template.f0_hz * (1.0 + rng.random_range(-F0_JITTER..=F0_JITTER));
    let phases: [f64; 8] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
    let nyquist_guard = 0.47 * sr;

    let mut out = vec![0.0; n];
    // phase of the fundamental, integrated so the sweep stays continuous
    let mut phase = 0.0;
    for (i, y) in out.iter_mut().enumerate() {
        let t = i as f64 / (n - 1) as f64;
        let f = f0 * (1.0 + template.sweep * t);
        let mut v = 0.0;
        for (k, (&w, &p)) in template.harmonic_weights.iter().zip(&phases).enumerate() {
            let h = (k + 1) as f64;
            if w > 0.0 && f * h < nyquist_guard {
                v += w * (h * phase + p).sin();
            }
        }
        *y = v * template.envelope.gain(t, secs);
        phase += 2.0 * PI * f / sr;
    }
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v /= rms);
    }
    out
}

fn uniform_ms<R: Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    rng.random_range(range.0..range.1)
}

/// Generates a corpus. Each motif draws from its own RNG stream derived from
/// the seed, and the noise from another.
pub fn generate(config: &CorpusConfig) -> Result<Corpus> {
    if config.sample_rate == 0 {
        return Err(Error::Config("sample rate must be positive".into()));
    }
    if config.snr_db.is_nan() {
        return Err(Error::Config("SNR must be a number or +inf".into()));
    }
    let sr = config.sample_rate;
    let mut clean: Vec<f64> = vec![0.0; ms_to_samples(EDGE_SILENCE_MS, sr)];
    let mut events = Vec::new();

    for motif in 0..config.n_motifs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(motif as u64);
        if motif > 0 {
            let pause = uniform_ms(&mut rng, MOTIF_SILENCE_MS);
            clean.resize(clean.len() + ms_to_samples(pause, sr), 0.0);
        }
        let len = rng.random_range(MOTIF_LEN.0..=MOTIF_LEN.1);
        for s in 0..len {
            if s > 0 {
                let range = if rng.random_bool(SHORT_GAP_PROB) { SHORT_GAP_MS } else { GAP_MS };
                let gap = uniform_ms(&mut rng, range);
                clean.resize(clean.len() + ms_to_samples(gap, sr), 0.0);
            }
            let label = rng.random_range(0..N_CLASSES) as u8;
            let syl = render_syllable(&TEMPLATES[usize::from(label)], &mut rng, sr);
            let onset = clean.len();
            clean.extend(syl.iter().map(|v| v * SYLLABLE_RMS));
            events.push(CorpusEvent {
                onset_sample: onset,
                offset_sample: clean.len(),
                label,
            });
        }
    }
    clean.resize(clean.len() + ms_to_samples(EDGE_SILENCE_MS, sr), 0.0);

    if config.snr_db.is_finite() {
        let sigma = SYLLABLE_RMS / 10f64.powf(config.snr_db / 20.0);
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(NOISE_STREAM);
        clean.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    let samples = clean
        .iter()
        .map(|v| v.round().clamp(-32768.0, 32767.0) as i16)
        .collect();
    Ok(Corpus {
        sample_rate: sr,
        samples,
        events,
    })
}

impl Corpus {
    pub fn labels(&self) -> Vec<u8> {
        self.events.iter().map(|e| e.label).collect()
    }

    fn ms(&self, samples: usize) -> f64 {
        samples as f64 * 1000.0 / f64::from(self.sample_rate)
    }

    pub fn records(&self) -> Vec<EventRecord> {
        let mut prev = 0;
        self.events
            .iter()
            .map(|e| {
                let r = EventRecord {
                    onset_ms: self.ms(e.onset_sample),
                    offset_ms: self.ms(e.offset_sample),
                    label: e.label,
                    gap_ms: self.ms(e.onset_sample - prev),
                };
                prev = e.offset_sample;
                r
            })
            .collect()
    }

    pub fn events_jsonl(&self) -> String {
        self.records()
            .iter()
            .map(|r| serde_json::to_string(r).expect("plain record serializes") + "\n")
            .collect()
    }

    /// Per block: does any syllable sample fall inside it.
    pub fn block_voicing(&self, block_size: usize) -> Vec<bool> {
        let n_blocks = self.samples.len().div_ceil(block_size);
        let mut out = vec![false; n_blocks];
        for e in &self.events {
            let first = e.onset_sample / block_size;
            let last = (e.offset_sample - 1) / block_size;
            out[first..=last].iter_mut().for_each(|b| *b = true);
        }
        out
    }

    pub fn voiced_fraction(&self, block_size: usize) -> f64 {
        let v = self.block_voicing(block_size);
        if v.is_empty() {
            return 0.0;
        }
        v.iter().filter(|&&b| b).count() as f64 / v.len() as f64
    }

    pub fn class_histogram(&self) -> [usize; N_CLASSES] {
        let mut h = [0; N_CLASSES];
        for e in &self.events {
            h[usize::from(e.label)] += 1;
        }
        h
    }

    pub fn write(&self, wav_path: &Path, jsonl_path: &Path) -> Result<()> {
        crate::wav::write_wav(wav_path, &self.samples, self.sample_rate)?;
        std::fs::write(jsonl_path, self.events_jsonl())?;
        Ok(())
    }
}

/// Pearson chi-squared statistic against a uniform distribution.
pub fn chi_squared_uniform(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if counts.is_empty() || total == 0 {
        return 0.0;
    }
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}
