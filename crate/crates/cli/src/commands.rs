//! One function per subcommand. Each returns a serializable report; printing
//! is left to the caller.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tinybird_core::audio::{frame_signal, gate_stream};
use tinybird_core::codecs::{codec_metrics, decode, encode, CodecState};
use tinybird_core::corpus::{generate, CorpusConfig};
use tinybird_core::dsp::spectrogram;
use tinybird_core::energy::{classifier_mode_power, estimate, BatteryModel, EnergyEstimate, EnergyTable};
use tinybird_core::pipeline::{edit_distance, read_event_labels, run_pipeline, syllable_error_rate, TimingReport};
use tinybird_core::protocol::{duty_cycle, read_stream, stream_decode, stream_encode, write_stream, GapPolicy, StreamHeader};
use tinybird_core::tinyml::load_model;
use tinybird_core::wav::{read_wav_at, write_wav};
use tinybird_core::{CodecId, Error, Result};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodeStats {
    pub input: PathBuf,
    pub output: PathBuf,
    pub codec: String,
    pub blocks: u64,
    pub voiced_blocks: u64,
    pub packets: usize,
    pub bytes: usize,
    pub payload_bytes: usize,
    pub duty_cycle: f64,
    /// Payload bits per second of input audio.
    pub bitrate_effective: f64,
    /// Everything written, headers included, per second of input audio.
    pub bitrate_wire: f64,
}

pub fn cmd_encode(wav_in: &Path, tbs_out: &Path, cfg: &RunConfig) -> Result<EncodeStats> {
    let pcm = read_wav_at(wav_in, cfg.sample_rate, cfg.resample)?;
    let blocks = frame_signal(&pcm, cfg.block_size, cfg.sample_rate)?;
    let decisions = gate_stream(&blocks, cfg.gate_state()?, cfg.threshold);
    let header = StreamHeader::new(cfg.sample_rate, cfg.block_size, cfg.codec)?.with_crc(cfg.crc);
    let packets = stream_encode(header, &blocks, &decisions, cfg.mtu)?;
    let bytes = write_stream(&header, &packets);
    std::fs::write(tbs_out, &bytes)?;

    let secs = pcm.len() as f64 / f64::from(cfg.sample_rate);
    let payload_bytes: usize = packets.iter().map(|p| p.payload.len()).sum();
    let per_sec = |n: usize| if secs > 0.0 { n as f64 * 8.0 / secs } else { 0.0 };
    Ok(EncodeStats {
        input: wav_in.to_path_buf(),
        output: tbs_out.to_path_buf(),
        codec: cfg.codec.to_string(),
        blocks: blocks.len() as u64,
        voiced_blocks: decisions.iter().filter(|d| d.is_voiced()).count() as u64,
        packets: packets.len(),
        bytes: bytes.len(),
        payload_bytes,
        duty_cycle: duty_cycle(&header, &packets),
        bitrate_effective: per_sec(payload_bytes),
        bitrate_wire: per_sec(bytes.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeqGapReport {
    pub expected: u16,
    pub found: u16,
    pub missing: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeReport {
    pub input: PathBuf,
    pub output: PathBuf,
    pub codec: String,
    pub sample_rate: u32,
    pub block_size: usize,
    pub packets: usize,
    pub voiced_blocks: u64,
    pub silent_blocks: u64,
    pub samples: usize,
    pub duration_secs: f64,
    pub skipped: Vec<String>,
    pub gaps: Vec<SeqGapReport>,
}

pub fn cmd_decode(tbs_in: &Path, wav_out: &Path, gap: GapPolicy) -> Result<DecodeReport> {
    let parsed = read_stream(&std::fs::read(tbs_in)?)?;
    for d in &parsed.diagnostics {
        log::warn!("{}: {d}", tbs_in.display());
    }
    let h = parsed.header;
    let rec = stream_decode(&h, &parsed.packets, gap)?;
    // every block the stream accounts for comes back as block_size samples
    debug_assert_eq!(rec.samples.len() as u64, rec.total_blocks() * h.block_size() as u64);
    write_wav(wav_out, &rec.samples, h.sample_rate)?;
    Ok(DecodeReport {
        input: tbs_in.to_path_buf(),
        output: wav_out.to_path_buf(),
        codec: h.codec.to_string(),
        sample_rate: h.sample_rate,
        block_size: h.block_size(),
        packets: parsed.packets.len(),
        voiced_blocks: rec.voiced_blocks,
        silent_blocks: rec.silent_blocks,
        samples: rec.samples.len(),
        duration_secs: rec.samples.len() as f64 / f64::from(h.sample_rate),
        skipped: parsed.diagnostics.iter().map(ToString::to_string).collect(),
        gaps: rec
            .gaps
            .iter()
            .map(|g| SeqGapReport {
                expected: g.expected,
                found: g.found,
                missing: g.missing,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodecRow {
    pub codec: String,
    pub bitrate_kbps: f64,
    pub compression_ratio: usize,
    pub snr_db: f64,
    pub bytes: usize,
    pub ble_ma: f64,
    pub overhead_ma: f64,
}

/// Runs every implemented codec over the whole file, ungated.
pub fn cmd_bench_codecs(wav_in: &Path, cfg: &RunConfig) -> Result<Vec<CodecRow>> {
    let pcm = read_wav_at(wav_in, cfg.sample_rate, cfg.resample)?;
    let table = load_profile(cfg)?;
    // pad to whole blocks so every codec sees a valid run length
    let mut padded = pcm.clone();
    padded.resize(pcm.len().div_ceil(cfg.block_size) * cfg.block_size, 0);
    CodecId::ALL
        .iter()
        .map(|&codec| {
            let bytes = encode(&mut CodecState::new(codec), &padded)?;
            let decoded = decode(&mut CodecState::new(codec), &bytes)?;
            let m = codec_metrics(codec, cfg.sample_rate, &pcm, &decoded[..pcm.len()])?;
            let row = table.row(codec.name())?;
            Ok(CodecRow {
                codec: codec.to_string(),
                bitrate_kbps: m.bitrate_bps as f64 / 1000.0,
                compression_ratio: m.compression_ratio,
                snr_db: m.snr_db,
                bytes: bytes.len(),
                ble_ma: row.ble_ma,
                overhead_ma: row.overhead_ma,
            })
        })
        .collect()
}

const BENCH_HEADER: [&str; 7] = ["codec", "bitrate_kbps", "ratio", "snr_db", "bytes", "ble_ma", "overhead_ma"];

fn bench_cells(r: &CodecRow) -> [String; 7] {
    [
        r.codec.clone(),
        format!("{}", r.bitrate_kbps),
        r.compression_ratio.to_string(),
        format!("{:.2}", r.snr_db),
        r.bytes.to_string(),
        format!("{}", r.ble_ma),
        format!("{}", r.overhead_ma),
    ]
}

pub fn bench_csv(rows: &[CodecRow]) -> String {
    let mut out = BENCH_HEADER.join(",") + "\n";
    for r in rows {
        out += &(bench_cells(r).join(",") + "\n");
    }
    out
}

pub fn bench_table(rows: &[CodecRow]) -> String {
    let cells: Vec<[String; 7]> = rows.iter().map(bench_cells).collect();
    let width: Vec<usize> = (0..7)
        .map(|c| cells.iter().map(|r| r[c].len()).chain([BENCH_HEADER[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, row: &[&str]| {
        let padded: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = width[c]) } else { format!("{v:>w$}", w = width[c]) })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  "));
    };
    line(&mut out, &BENCH_HEADER);
    for r in &cells {
        line(&mut out, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub events: usize,
    pub timing: TimingReport,
}

/// Returns the events as JSONL plus the timing summary.
pub fn cmd_run(wav_in: &Path, cfg: &RunConfig) -> Result<(String, Vec<[u8; 7]>, RunReport)> {
    let model_path = cfg
        .model
        .as_deref()
        .ok_or_else(|| Error::Config("no model given (use --model or set `model` in the config file)".into()))?;
    let (models, report) = load_model(model_path)?;
    for w in &report.warnings {
        log::warn!("{}: {w}", model_path.display());
    }
    let pcm = read_wav_at(wav_in, cfg.sample_rate, cfg.resample)?;
    let pc = cfg.pipeline();
    let out = run_pipeline(&pcm, &models, &pc)?;
    let jsonl = out
        .events
        .iter()
        .map(|e| serde_json::to_string(&e.to_record(pc.block_ms())).expect("plain record serializes") + "\n")
        .collect();
    let binary = out.events.iter().map(|e| e.to_binary()).collect();
    Ok((
        jsonl,
        binary,
        RunReport {
            events: out.events.len(),
            timing: out.timing,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SerReport {
    pub ser: f64,
    pub edits: usize,
    pub predicted: usize,
    pub reference: usize,
}

pub fn cmd_eval_ser(pred: &Path, reference: &Path) -> Result<SerReport> {
    let read = |p: &Path| -> Result<Vec<u8>> {
        read_event_labels(&std::fs::read_to_string(p)?)
            .map_err(|e| Error::Pipeline(format!("{}: {}", p.display(), e.to_string().trim_start_matches("pipeline: "))))
    };
    let (p, r) = (read(pred)?, read(reference)?);
    Ok(SerReport {
        ser: syllable_error_rate(&p, &r)?,
        edits: edit_distance(&p, &r),
        predicted: p.len(),
        reference: r.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrogramReport {
    pub frames: usize,
    pub bins: usize,
    pub hop: usize,
}

pub fn cmd_spectrogram(
    wav_in: &Path,
    csv_out: &Path,
    png_out: Option<&Path>,
    hop: Option<usize>,
    cfg: &RunConfig,
) -> Result<SpectrogramReport> {
    let pcm = read_wav_at(wav_in, cfg.sample_rate, cfg.resample)?;
    let hop = hop.unwrap_or(cfg.block_size / 2).max(1);
    let s = spectrogram(&pcm, cfg.sample_rate, cfg.block_size, hop)?;
    let file = std::fs::File::create(csv_out)?;
    s.write_csv(std::io::BufWriter::new(file))?;
    if let Some(png) = png_out {
        s.write_png(png)?;
    }
    Ok(SpectrogramReport {
        frames: s.n_frames,
        bins: s.n_bins,
        hop,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub stream: PathBuf,
    pub blocks: u64,
    #[serde(flatten)]
    pub estimate: EnergyEstimate,
    /// Total draw while streaming, microphone included.
    pub streaming_power_mw: f64,
    /// On-node classification with the radio idle.
    pub classifier_mode_power_mw: f64,
}

pub fn load_profile(cfg: &RunConfig) -> Result<EnergyTable> {
    match &cfg.profile {
        Some(p) => EnergyTable::load(p),
        None => Ok(EnergyTable::default()),
    }
}

pub fn cmd_energy(tbs_in: &Path, cfg: &RunConfig) -> Result<EnergyReport> {
    let parsed = read_stream(&std::fs::read(tbs_in)?)?;
    for d in &parsed.diagnostics {
        log::warn!("{}: {d}", tbs_in.display());
    }
    let table = load_profile(cfg)?;
    let battery = match &cfg.battery {
        Some(p) => BatteryModel::load(p)?,
        None => BatteryModel::default(),
    };
    let h = parsed.header;
    let v = duty_cycle(&h, &parsed.packets);
    let blocks = parsed
        .packets
        .iter()
        .map(|p| u64::from(p.silence_blocks) + p.voiced_blocks(h.block_bytes()) as u64)
        .sum();
    let codec = h.codec.name();
    Ok(EnergyReport {
        stream: tbs_in.to_path_buf(),
        blocks,
        estimate: estimate(&table, &battery, codec, v)?,
        streaming_power_mw: table.streaming_power_mw(codec, v)?,
        classifier_mode_power_mw: classifier_mode_power(&table.classifier_profile()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub wav: PathBuf,
    pub events_path: PathBuf,
    pub samples: usize,
    pub duration_secs: f64,
    pub events: usize,
    pub voiced_fraction: f64,
}

pub fn cmd_gen_corpus(config: &CorpusConfig, wav_out: &Path, events_out: &Path, block_size: usize) -> Result<CorpusReport> {
    let c = generate(config)?;
    c.write(wav_out, events_out)?;
    Ok(CorpusReport {
        wav: wav_out.to_path_buf(),
        events_path: events_out.to_path_buf(),
        samples: c.samples.len(),
        duration_secs: c.samples.len() as f64 / f64::from(c.sample_rate),
        events: c.events.len(),
        voiced_fraction: c.voiced_fraction(block_size),
    })
}
