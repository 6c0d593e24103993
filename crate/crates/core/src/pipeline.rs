//! On-line syllable pipeline: per-block detection, hangover segmentation,
//! three-block classification and compact event output.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::audio::{frame_signal, AudioBlock};
use crate::dsp::{MfccExtractor, MfccVector};
use crate::error::{Error, Result};
use crate::tinyml::{Models, ScratchBuffer, N_SELECTED_BLOCKS};

pub const DEFAULT_HANGOVER: u32 = 1;
pub const DEFAULT_MIN_LEN: u32 = 1;
/// Inference times of the deployed networks, ms.
pub const DETECTOR_INFERENCE_MS: f64 = 1.2;
pub const CLASSIFIER_INFERENCE_MS: f64 = 4.2;

/// A classified syllable. Block indices are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyllableEvent {
    pub onset_block: u64,
    pub offset_block: u64,
    pub label: u8,
    /// Blocks between the previous event's offset (or stream start) and this onset.
    pub gap_blocks: u64,
}

impl SyllableEvent {
    pub fn duration_blocks(&self) -> u64 {
        self.offset_block - self.onset_block + 1
    }

    pub fn to_record(&self, block_ms: f64) -> EventRecord {
        EventRecord {
            onset_ms: self.onset_block as f64 * block_ms,
            offset_ms: (self.offset_block + 1) as f64 * block_ms,
            label: self.label,
            gap_ms: self.gap_blocks as f64 * block_ms,
        }
    }

    /// `gap_blocks u32 | duration_blocks u16 | label u8`, little-endian.
    pub fn to_binary(&self) -> [u8; 7] {
        let mut out = [0u8; 7];
        out[..4].copy_from_slice(&(self.gap_blocks.min(u64::from(u32::MAX)) as u32).to_le_bytes());
        out[4..6].copy_from_slice(&(self.duration_blocks().min(u64::from(u16::MAX)) as u16).to_le_bytes());
        out[6] = self.label;
        out
    }
}

/// One JSON line of event output. Times are in ms; `offset_ms` is exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub onset_ms: f64,
    pub offset_ms: f64,
    pub label: u8,
    pub gap_ms: f64,
}

pub fn read_event_labels(jsonl: &str) -> Result<Vec<u8>> {
    jsonl
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<EventRecord>(l)
                .map(|r| r.label)
                .map_err(|e| Error::Pipeline(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SegmenterState {
    pub in_syllable: bool,
    pub onset: u64,
    pub last_positive: u64,
    pub hangover_remaining: u32,
}

/// Hangover state machine turning per-block detections into segments.
///
/// A segment opens on the first positive block and closes once `hangover`
/// consecutive negatives have been seen; its offset is the last positive
/// block. Segments shorter than `min_len` blocks are dropped.
#[derive(Debug, Clone)]
pub struct Segmenter {
    hangover: u32,
    min_len: u32,
    state: SegmenterState,
}

impl Segmenter {
    pub fn new(hangover: u32, min_len: u32) -> Result<Self> {
        if hangover == 0 {
            return Err(Error::Config("hangover must be at least one block".into()));
        }
        Ok(Self {
            hangover,
            min_len: min_len.max(1),
            state: SegmenterState::default(),
        })
    }

    pub fn state(&self) -> SegmenterState {
        self.state
    }

    fn close(&mut self) -> Option<(u64, u64)> {
        let s = self.state;
        self.state = SegmenterState::default();
        let len = s.last_positive - s.onset + 1;
        (len >= u64::from(self.min_len)).then_some((s.onset, s.last_positive))
    }

    pub fn push(&mut self, index: u64, positive: bool) -> Option<(u64, u64)> {
        let s = &mut self.state;
        match (s.in_syllable, positive) {
            (false, true) => {
                *s = SegmenterState {
                    in_syllable: true,
                    onset: index,
                    last_positive: index,
                    hangover_remaining: self.hangover,
                };
                None
            }
            (false, false) => None,
            (true, true) => {
                s.last_positive = index;
                s.hangover_remaining = self.hangover;
                None
            }
            (true, false) => {
                s.hangover_remaining -= 1;
                if s.hangover_remaining == 0 {
                    self.close()
                } else {
                    None
                }
            }
        }
    }

    pub fn finish(&mut self) -> Option<(u64, u64)> {
        if self.state.in_syllable {
            self.close()
        } else {
            None
        }
    }
}

pub fn segment(decisions: &[bool], hangover: u32, min_len: u32) -> Result<Vec<(u64, u64)>> {
    let mut seg = Segmenter::new(hangover, min_len)?;
    let mut out: Vec<(u64, u64)> = decisions
        .iter()
        .enumerate()
        .filter_map(|(i, &d)| seg.push(i as u64, d))
        .collect();
    out.extend(seg.finish());
    Ok(out)
}

/// First, middle and last block of a segment; the middle index rounds half up.
pub fn select_blocks(onset: u64, offset: u64) -> [u64; N_SELECTED_BLOCKS] {
    debug_assert!(onset <= offset);
    let span = offset.saturating_sub(onset);
    [onset, onset + span.div_ceil(2), onset + span]
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub sample_rate: u32,
    pub block_size: usize,
    pub hangover: u32,
    pub min_len: u32,
    /// Overrides the detector threshold stored with the model.
    pub detector_threshold: Option<f32>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_rate: crate::audio::DEFAULT_SAMPLE_RATE,
            block_size: crate::audio::DEFAULT_BLOCK_SIZE,
            hangover: DEFAULT_HANGOVER,
            min_len: DEFAULT_MIN_LEN,
            detector_threshold: None,
        }
    }
}

impl PipelineConfig {
    pub fn block_ms(&self) -> f64 {
        self.block_size as f64 * 1000.0 / f64::from(self.sample_rate)
    }
}

/// Invocation counts and the compute time they imply on the node.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TimingReport {
    pub blocks: u64,
    pub detector_calls: u64,
    pub classifier_calls: u64,
    pub segments: u64,
    /// Blocks after the last event's offset.
    pub trailing_blocks: u64,
    pub modeled_detector_ms: f64,
    pub modeled_classifier_ms: f64,
    pub scratch_peak_bytes: usize,
}

/// Streaming form of the pipeline, one block at a time.
pub struct SyllablePipeline {
    models: Models,
    extractor: MfccExtractor,
    segmenter: Segmenter,
    /// MFCCs from the open segment's onset onwards.
    pending: VecDeque<(u64, MfccVector)>,
    last_offset: Option<u64>,
    next_index: u64,
    scratch: ScratchBuffer,
    timing: TimingReport,
}

impl SyllablePipeline {
    pub fn new(mut models: Models, config: &PipelineConfig) -> Result<Self> {
        if let Some(t) = config.detector_threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("detector threshold {t} outside (0, 1)")));
            }
            models.detector.threshold = t;
        }
        Ok(Self {
            models,
            extractor: MfccExtractor::standard(config.block_size, config.sample_rate)?,
            segmenter: Segmenter::new(config.hangover, config.min_len)?,
            pending: VecDeque::new(),
            last_offset: None,
            next_index: 0,
            scratch: ScratchBuffer::default(),
            timing: TimingReport::default(),
        })
    }

    fn emit(&mut self, onset: u64, offset: u64) -> SyllableEvent {
        let picks = select_blocks(onset, offset);
        let blocks: [MfccVector; N_SELECTED_BLOCKS] = picks.map(|i| {
            self.pending
                .iter()
                .find(|(idx, _)| *idx == i)
                .map(|(_, v)| *v)
                .expect("segment blocks are buffered")
        });
        let result = self.models.classifier.classify(&blocks, &mut self.scratch);
        self.timing.classifier_calls += 1;
        self.timing.segments += 1;
        let gap_blocks = match self.last_offset {
            Some(prev) => onset - prev - 1,
            None => onset,
        };
        self.last_offset = Some(offset);
        SyllableEvent {
            onset_block: onset,
            offset_block: offset,
            label: result.label,
            gap_blocks,
        }
    }

    pub fn push_block(&mut self, block: &AudioBlock) -> Result<Option<SyllableEvent>> {
        let index = self.next_index;
        self.next_index += 1;
        let features = self.extractor.block(block)?;
        let detection = self.models.detector.detect(&features);
        self.timing.blocks += 1;
        self.timing.detector_calls += 1;

        let was_open = self.segmenter.state().in_syllable;
        let closed = self.segmenter.push(index, detection.is_syllable);
        if self.segmenter.state().in_syllable || was_open {
            self.pending.push_back((index, features));
        }
        let event = closed.map(|(on, off)| self.emit(on, off));
        if !self.segmenter.state().in_syllable {
            self.pending.clear();
        }
        Ok(event)
    }

    pub fn finish(mut self) -> (Option<SyllableEvent>, TimingReport) {
        let event = self.segmenter.finish().map(|(on, off)| self.emit(on, off));
        let mut t = self.timing;
        t.trailing_blocks = match self.last_offset {
            Some(off) => t.blocks - off - 1,
            None => t.blocks,
        };
        t.modeled_detector_ms = t.detector_calls as f64 * DETECTOR_INFERENCE_MS;
        t.modeled_classifier_ms = t.classifier_calls as f64 * CLASSIFIER_INFERENCE_MS;
        t.scratch_peak_bytes = self.scratch.peak_usage();
        (event, t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub events: Vec<SyllableEvent>,
    pub timing: TimingReport,
}

pub fn run_pipeline(pcm: &[i16], models: &Models, config: &PipelineConfig) -> Result<PipelineOutput> {
    let mut pipeline = SyllablePipeline::new(models.clone(), config)?;
    let mut events = Vec::new();
    for block in frame_signal(pcm, config.block_size, config.sample_rate)? {
        events.extend(pipeline.push_block(&block)?);
    }
    let (last, timing) = pipeline.finish();
    events.extend(last);
    Ok(PipelineOutput { events, timing })
}

/// Unit-cost Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance between label sequences divided by the reference length.
pub fn syllable_error_rate<T: PartialEq>(predicted: &[T], reference: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Pipeline("syllable error rate is undefined for an empty reference".into()));
    }
    Ok(edit_distance(predicted, reference) as f64 / reference.len() as f64)
}
