//! Command-line front end: argument parsing, config resolution and dispatch.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use tinybird_core::corpus::CorpusConfig;
use tinybird_core::protocol::GapPolicy;
use tinybird_core::{Error, Result};

use config::{GateKind, RunConfig, Settings, PROFILE_ENV};

#[derive(Debug, Parser)]
#[command(name = "tinybird", version, about = "Host-side tools for the tinybird acoustic sensor data path")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sample_rate: Option<u32>,
    #[arg(long, global = true)]
    pub block_size: Option<usize>,
    /// Resample input WAVs whose rate differs from --sample-rate.
    #[arg(long, global = true)]
    pub resample: bool,
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Args, Default)]
pub struct StreamArgs {
    /// raw, adpcm, dm or cfdm.
    #[arg(long)]
    pub codec: Option<String>,
    /// Largest packet in bytes, excluding the length prefix.
    #[arg(long)]
    pub mtu: Option<usize>,
    /// Append a CRC-16 to every packet.
    #[arg(long)]
    pub crc: bool,
    #[arg(long, value_enum)]
    pub gate: Option<GateKind>,
    /// Gate threshold in PCM RMS units (the first threshold in adaptive mode).
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub threshold_factor: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct EnergyArgs {
    /// Current profile TOML. Defaults to $TINYBIRD_PROFILE, then the bundled profile.
    #[arg(long, value_name = "FILE")]
    pub profile: Option<PathBuf>,
    /// Battery TOML; defaults to the bundled cell.
    #[arg(long, value_name = "FILE")]
    pub battery: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gate, compress and packetize WAV files into .tbs streams.
    Encode {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output path; only with a single input.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Directory for outputs named after their inputs.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Files encoded in parallel.
        #[arg(short, long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        stream: StreamArgs,
    },
    /// Reconstruct a WAV from a .tbs stream.
    Decode {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Silent blocks inserted per lost packet; lost packets are dropped by default.
        #[arg(long)]
        gap_blocks: Option<u32>,
    },
    /// Compare the codecs on one WAV.
    BenchCodecs {
        input: PathBuf,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        profile: Option<PathBuf>,
    },
    /// Detect and classify syllables.
    Run {
        input: PathBuf,
        /// Weight file (.tbm).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Events JSONL; printed to stdout when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write 7-byte binary event records.
        #[arg(long)]
        binary: Option<PathBuf>,
        #[arg(long)]
        hangover: Option<u32>,
        #[arg(long)]
        min_len: Option<u32>,
        #[arg(long)]
        detector_threshold: Option<f32>,
    },
    /// Syllable error rate of predicted events against reference events.
    EvalSer { predicted: PathBuf, reference: PathBuf },
    /// Magnitude spectrogram as CSV and optionally PNG.
    Spectrogram {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
        /// Frame hop in samples; half a block by default.
        #[arg(long)]
        hop: Option<usize>,
    },
    /// Battery lifetime for streaming a .tbs file.
    EstimateEnergy {
        input: PathBuf,
        #[command(flatten)]
        energy: EnergyArgs,
    },
    /// Synthesize a labelled song corpus.
    GenCorpus {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        motifs: usize,
        /// Syllable-to-noise ratio; `inf` for no noise.
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        #[arg(short, long)]
        output: PathBuf,
        /// Ground-truth JSONL; defaults to the WAV path with a .jsonl extension.
        #[arg(long)]
        events: Option<PathBuf>,
    },
}

impl Cli {
    /// Settings given on the command line.
    fn flag_settings(&self) -> Settings {
        let g = &self.global;
        let mut s = Settings {
            sample_rate: g.sample_rate,
            block_size: g.block_size,
            resample: g.resample.then_some(true),
            ..Settings::default()
        };
        match &self.command {
            Command::Encode { stream, .. } => {
                s.codec = stream.codec.clone();
                s.mtu = stream.mtu;
                s.crc = stream.crc.then_some(true);
                s.gate = stream.gate;
                s.threshold = stream.threshold;
                s.threshold_factor = stream.threshold_factor;
            }
            Command::BenchCodecs { profile, .. } => s.profile = profile.clone(),
            Command::Run {
                model,
                hangover,
                min_len,
                detector_threshold,
                ..
            } => {
                s.model = model.clone();
                s.hangover = *hangover;
                s.min_len = *min_len;
                s.detector_threshold = *detector_threshold;
            }
            Command::EstimateEnergy { energy, .. } => {
                s.profile = energy.profile.clone();
                s.battery = energy.battery.clone();
            }
            _ => {}
        }
        s
    }

    pub fn resolve(&self, env_profile: Option<PathBuf>) -> Result<RunConfig> {
        let file = match &self.global.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        RunConfig::resolve(self.flag_settings(), file, env_profile)
    }
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string(value).expect("report serializes"))?;
    Ok(())
}

fn encode_output(input: &Path, output: Option<&Path>, out_dir: Option<&Path>) -> PathBuf {
    if let Some(o) = output {
        return o.to_path_buf();
    }
    let name = input.with_extension("tbs");
    match out_dir {
        Some(dir) => dir.join(name.file_name().expect("input names a file")),
        None => name,
    }
}

/// Runs one parsed command, writing machine-readable results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let env_profile = std::env::var_os(PROFILE_ENV).map(PathBuf::from);
    let cfg = cli.resolve(env_profile)?;
    match &cli.command {
        Command::Encode {
            inputs,
            output,
            out_dir,
            jobs,
            ..
        } => {
            if output.is_some() && inputs.len() > 1 {
                return Err(Error::Config("--output takes a single input; use --out-dir".into()));
            }
            if *jobs == 0 {
                return Err(Error::Config("--jobs must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(*jobs)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            let results: Vec<Result<commands::EncodeStats>> = pool.install(|| {
                inputs
                    .par_iter()
                    .map(|input| {
                        let dest = encode_output(input, output.as_deref(), out_dir.as_deref());
                        commands::cmd_encode(input, &dest, &cfg)
                    })
                    .collect()
            });
            let mut first_err = None;
            for r in results {
                match r {
                    Ok(stats) => print_json(out, &stats)?,
                    Err(e) if first_err.is_none() => first_err = Some(e),
                    Err(e) => eprintln!("error: {e}"),
                }
            }
            first_err.map_or(Ok(()), Err)
        }
        Command::Decode {
            input,
            output,
            gap_blocks,
        } => {
            let gap = gap_blocks.map_or(GapPolicy::Omit, GapPolicy::SilentBlocks);
            print_json(out, &commands::cmd_decode(input, output, gap)?)
        }
        Command::BenchCodecs { input, csv, .. } => {
            let rows = commands::cmd_bench_codecs(input, &cfg)?;
            if let Some(path) = csv {
                std::fs::write(path, commands::bench_csv(&rows))?;
            }
            write!(out, "{}", commands::bench_table(&rows))?;
            Ok(())
        }
        Command::Run { input, output, binary, .. } => {
            let (jsonl, records, report) = commands::cmd_run(input, &cfg)?;
            if let Some(path) = binary {
                std::fs::write(path, records.concat())?;
            }
            match output {
                Some(path) => {
                    std::fs::write(path, jsonl)?;
                    print_json(out, &report)
                }
                None => {
                    write!(out, "{jsonl}")?;
                    log::info!("{}", serde_json::to_string(&report).expect("report serializes"));
                    Ok(())
                }
            }
        }
        Command::EvalSer { predicted, reference } => print_json(out, &commands::cmd_eval_ser(predicted, reference)?),
        Command::Spectrogram { input, output, png, hop } => {
            print_json(out, &commands::cmd_spectrogram(input, output, png.as_deref(), *hop, &cfg)?)
        }
        Command::EstimateEnergy { input, .. } => print_json(out, &commands::cmd_energy(input, &cfg)?),
        Command::GenCorpus {
            seed,
            motifs,
            snr_db,
            output,
            events,
        } => {
            let events = events.clone().unwrap_or_else(|| output.with_extension("jsonl"));
            let config = CorpusConfig {
                sample_rate: cfg.sample_rate,
                ..CorpusConfig::new(*seed, *motifs, *snr_db)
            };
            print_json(out, &commands::cmd_gen_corpus(&config, output, &events, cfg.block_size)?)
        }
    }
}

/// Exit status for an error: 2 for invalid input or configuration, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        2
    } else {
        1
    }
}
