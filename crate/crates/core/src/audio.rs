//! Sample ingestion, power-of-two framing and the voiced/silent block gate.

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_BLOCK_SIZE: usize = 256;
pub const DEFAULT_THRESHOLD_FACTOR: f64 = 4.0;
/// Weight of a new silent-block RMS in the adaptive noise floor.
pub const NOISE_FLOOR_EMA: f64 = 1.0 / 16.0;

/// A fixed-size window of 16-bit PCM samples.
///
/// A block built from the tail of a signal that does not fill a whole block is
/// zero padded; `valid_len` records how many leading samples are real.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioBlock {
    pub index: u64,
    pub samples: Vec<i16>,
    pub sample_rate: u32,
    pub valid_len: usize,
}

impl AudioBlock {
    pub fn new(index: u64, samples: Vec<i16>, sample_rate: u32) -> Self {
        let valid_len = samples.len();
        Self {
            index,
            samples,
            sample_rate,
            valid_len,
        }
    }

    pub fn block_size(&self) -> usize {
        self.samples.len()
    }

    pub fn is_padded(&self) -> bool {
        self.valid_len < self.samples.len()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Root-mean-square over the whole block, padding included.
    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }
}

pub fn rms(samples: &[i16]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let energy: f64 = samples.iter().map(|&s| f64::from(s) * f64::from(s)).sum();
    (energy / samples.len() as f64).sqrt()
}

pub fn check_block_size(block_size: usize) -> Result<()> {
    if block_size == 0 || !block_size.is_power_of_two() {
        return Err(Error::Config(format!(
            "block size {block_size} is not a power of two"
        )));
    }
    if block_size > u16::MAX as usize {
        return Err(Error::Config(format!(
            "block size {block_size} does not fit the stream header"
        )));
    }
    Ok(())
}

/// Splits `pcm` into consecutive non-overlapping blocks.
pub fn frame_signal(pcm: &[i16], block_size: usize, sample_rate: u32) -> Result<Vec<AudioBlock>> {
    check_block_size(block_size)?;
    if pcm.is_empty() {
        return Err(Error::Config("cannot frame an empty signal".into()));
    }
    let blocks = pcm
        .chunks(block_size)
        .enumerate()
        .map(|(i, chunk)| {
            let mut samples = chunk.to_vec();
            samples.resize(block_size, 0);
            AudioBlock {
                index: i as u64,
                samples,
                sample_rate,
                valid_len: chunk.len(),
            }
        })
        .collect();
    Ok(blocks)
}

/// Concatenates the unpadded content of `blocks`.
pub fn unframe(blocks: &[AudioBlock]) -> Vec<i16> {
    blocks
        .iter()
        .flat_map(|b| b.samples[..b.valid_len].iter().copied())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMode {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateDecision {
    Voiced,
    Silent,
}

impl GateDecision {
    pub fn is_voiced(self) -> bool {
        self == GateDecision::Voiced
    }
}

/// State of the block gate.
///
/// In adaptive mode a block is voiced when its RMS reaches
/// `noise_floor * threshold_factor`; the floor follows silent blocks only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateState {
    pub noise_floor: f64,
    pub threshold_factor: f64,
    pub mode: GateMode,
}

impl GateState {
    pub fn fixed() -> Self {
        Self {
            noise_floor: 0.0,
            threshold_factor: DEFAULT_THRESHOLD_FACTOR,
            mode: GateMode::Fixed,
        }
    }

    pub fn adaptive(initial_floor: f64, threshold_factor: f64) -> Result<Self> {
        if !(initial_floor >= 0.0) || !initial_floor.is_finite() {
            return Err(Error::Config(format!(
                "noise floor must be finite and non-negative, got {initial_floor}"
            )));
        }
        if !(threshold_factor > 1.0) || !threshold_factor.is_finite() {
            return Err(Error::Config(format!(
                "adaptive threshold factor must exceed 1, got {threshold_factor}"
            )));
        }
        Ok(Self {
            noise_floor: initial_floor,
            threshold_factor,
            mode: GateMode::Adaptive,
        })
    }

    /// Adaptive gate whose first threshold equals `threshold`.
    pub fn adaptive_from_threshold(threshold: f64, threshold_factor: f64) -> Result<Self> {
        Self::adaptive(threshold / threshold_factor, threshold_factor)
    }

    /// RMS a block must reach to count as voiced.
    pub fn threshold(&self, fixed_threshold: f64) -> f64 {
        match self.mode {
            GateMode::Fixed => fixed_threshold,
            GateMode::Adaptive => self.noise_floor * self.threshold_factor,
        }
    }
}

/// Classifies one block. An all-zero block is always silent.
pub fn gate_block(
    block: &AudioBlock,
    state: &GateState,
    fixed_threshold: f64,
) -> (GateDecision, GateState) {
    let level = block.rms();
    let voiced = level > 0.0 && level >= state.threshold(fixed_threshold);
    let mut next = *state;
    if voiced {
        return (GateDecision::Voiced, next);
    }
    if state.mode == GateMode::Adaptive {
        next.noise_floor += (level - state.noise_floor) * NOISE_FLOOR_EMA;
    }
    (GateDecision::Silent, next)
}

/// Runs the gate over a stream of blocks in order.
pub fn gate_stream(
    blocks: &[AudioBlock],
    initial: GateState,
    fixed_threshold: f64,
) -> Vec<GateDecision> {
    let mut state = initial;
    blocks
        .iter()
        .map(|b| {
            let (decision, next) = gate_block(b, &state, fixed_threshold);
            state = next;
            decision
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_division() {
        let blocks = frame_signal(&[1i16; 512], 256, 16_000).unwrap();
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].index, 0);
        assert_eq!(blocks[1].index, 1);
        assert!(!blocks[1].is_padded());
    }

    #[test]
    fn partial_block_is_padded() {
        let blocks = frame_signal(&[7i16; 300], 256, 16_000).unwrap();
        assert_eq!(blocks.len(), 2);
        assert!(blocks[1].is_padded());
        assert_eq!(blocks[1].valid_len, 44);
        assert_eq!(blocks[1].samples[44..].iter().filter(|&&s| s == 0).count(), 212);
    }

    #[test]
    fn one_second_cadence() {
        let blocks = frame_signal(&vec![0i16; 16_000], 256, 16_000).unwrap();
        assert_eq!(blocks.len(), 63);
        assert_eq!(blocks.iter().filter(|b| !b.is_padded()).count(), 62);
        assert!((blocks[0].duration_secs() - 0.016).abs() < 1e-12);
        assert!((1.0 / blocks[0].duration_secs() - 62.5).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_block_size() {
        assert!(matches!(frame_signal(&[0; 10], 100, 16_000), Err(Error::Config(_))));
        assert!(matches!(frame_signal(&[0; 10], 0, 16_000), Err(Error::Config(_))));
        assert!(frame_signal(&[], 256, 16_000).is_err());
    }

    #[test]
    fn zero_block_is_silent() {
        let block = AudioBlock::new(0, vec![0; 256], 16_000);
        let (d, _) = gate_block(&block, &GateState::fixed(), 1e-9);
        assert_eq!(d, GateDecision::Silent);
        let adaptive = GateState::adaptive(0.0, 4.0).unwrap();
        let (d, _) = gate_block(&block, &adaptive, 0.0);
        assert_eq!(d, GateDecision::Silent);
    }

    #[test]
    fn square_wave_is_voiced() {
        let samples = (0..256).map(|i| if i % 2 == 0 { 32767 } else { -32767 }).collect();
        let block = AudioBlock::new(0, samples, 16_000);
        assert!((block.rms() - 32767.0).abs() < 1e-9);
        let (d, _) = gate_block(&block, &GateState::fixed(), 1000.0);
        assert_eq!(d, GateDecision::Voiced);
    }

    #[test]
    fn adaptive_noise_then_tone() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise_blocks = 40;
        let tone_blocks = 20;
        let mut pcm = Vec::new();
        for _ in 0..noise_blocks * 256 {
            // uniform on [-a, a] has RMS a / sqrt(3)
            let a = 100.0 * 3f64.sqrt();
            pcm.push(rng.random_range(-a..a).round() as i16);
        }
        for n in 0..tone_blocks * 256 {
            let t = n as f64 / 16_000.0;
            pcm.push((2000.0 * 2f64.sqrt() * (2.0 * std::f64::consts::PI * 1000.0 * t).sin()) as i16);
        }
        let blocks = frame_signal(&pcm, 256, 16_000).unwrap();
        let initial = GateState::adaptive_from_threshold(1000.0, 4.0).unwrap();
        let decisions = gate_stream(&blocks, initial, 0.0);

        // scalar reference: per-block RMS from raw slices, EMA on silent blocks only
        let mut floor = 250.0f64;
        for (i, chunk) in pcm.chunks(256).enumerate() {
            let e: f64 = chunk.iter().map(|&s| (s as f64).powi(2)).sum::<f64>() / 256.0;
            let r = e.sqrt();
            let voiced = r > 0.0 && r >= floor * 4.0;
            assert_eq!(decisions[i].is_voiced(), voiced, "block {i}");
            if !voiced {
                floor += (r - floor) / 16.0;
            }
        }
        assert!(decisions[..noise_blocks].iter().all(|d| !d.is_voiced()));
        assert!(decisions[noise_blocks..].iter().all(|d| d.is_voiced()));
    }

    #[test]
    fn adaptive_rejects_factor_at_most_one() {
        assert!(GateState::adaptive(10.0, 1.0).is_err());
        assert!(GateState::adaptive(-1.0, 4.0).is_err());
    }

    proptest! {
        #[test]
        fn framing_is_lossless(pcm in proptest::collection::vec(any::<i16>(), 1..2000), shift in 0u32..10) {
            let bs = 1usize << shift;
            let blocks = frame_signal(&pcm, bs, 16_000).unwrap();
            prop_assert_eq!(blocks.len(), pcm.len().div_ceil(bs));
            prop_assert_eq!(unframe(&blocks), pcm);
        }

        #[test]
        fn floor_never_rises_on_voiced(levels in proptest::collection::vec(0i16..3000, 1..60)) {
            let mut state = GateState::adaptive(50.0, 4.0).unwrap();
            let mut replay = state;
            for (i, &lvl) in levels.iter().enumerate() {
                let block = AudioBlock::new(i as u64, vec![lvl; 64], 16_000);
                let (d, next) = gate_block(&block, &state, 0.0);
                let (d2, _) = gate_block(&block, &replay, 0.0);
                prop_assert_eq!(d, d2);
                if d.is_voiced() {
                    prop_assert!(next.noise_floor <= state.noise_floor);
                }
                state = next;
                replay = next;
            }
        }
    }
}
