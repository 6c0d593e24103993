//! Run configuration: command-line flags over a TOML file over defaults.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use tinybird_core::audio::{check_block_size, GateState, DEFAULT_BLOCK_SIZE, DEFAULT_SAMPLE_RATE, DEFAULT_THRESHOLD_FACTOR};
use tinybird_core::pipeline::{PipelineConfig, DEFAULT_HANGOVER, DEFAULT_MIN_LEN};
use tinybird_core::protocol::DEFAULT_MTU;
use tinybird_core::{CodecId, Error, Packet, Result};

pub const PROFILE_ENV: &str = "TINYBIRD_PROFILE";
pub const DEFAULT_GATE_THRESHOLD: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Fixed,
    Adaptive,
}

/// Every setting, each optional. Used both for the config file and for the
/// flags that override it.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub sample_rate: Option<u32>,
    pub block_size: Option<usize>,
    pub resample: Option<bool>,
    pub codec: Option<String>,
    pub mtu: Option<usize>,
    pub crc: Option<bool>,
    pub gate: Option<GateKind>,
    pub threshold: Option<f64>,
    pub threshold_factor: Option<f64>,
    pub model: Option<PathBuf>,
    pub hangover: Option<u32>,
    pub min_len: Option<u32>,
    pub detector_threshold: Option<f32>,
    pub profile: Option<PathBuf>,
    pub battery: Option<PathBuf>,
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), strip(&e))))
    }

    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            sample_rate: self.sample_rate.or(base.sample_rate),
            block_size: self.block_size.or(base.block_size),
            resample: self.resample.or(base.resample),
            codec: self.codec.or(base.codec),
            mtu: self.mtu.or(base.mtu),
            crc: self.crc.or(base.crc),
            gate: self.gate.or(base.gate),
            threshold: self.threshold.or(base.threshold),
            threshold_factor: self.threshold_factor.or(base.threshold_factor),
            model: self.model.or(base.model),
            hangover: self.hangover.or(base.hangover),
            min_len: self.min_len.or(base.min_len),
            detector_threshold: self.detector_threshold.or(base.detector_threshold),
            profile: self.profile.or(base.profile),
            battery: self.battery.or(base.battery),
        }
    }
}

fn strip(e: &Error) -> String {
    e.to_string().trim_start_matches("config: ").to_string()
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sample_rate: u32,
    pub block_size: usize,
    pub resample: bool,
    pub codec: CodecId,
    pub mtu: usize,
    pub crc: bool,
    pub gate: GateKind,
    pub threshold: f64,
    pub threshold_factor: f64,
    pub model: Option<PathBuf>,
    pub hangover: u32,
    pub min_len: u32,
    pub detector_threshold: Option<f32>,
    /// `None` means the bundled profile.
    pub profile: Option<PathBuf>,
    pub battery: Option<PathBuf>,
}

impl RunConfig {
    /// `env_profile` is the value of `TINYBIRD_PROFILE`; it only fills in
    /// when neither flags nor the file name a profile.
    pub fn resolve(flags: Settings, file: Settings, env_profile: Option<PathBuf>) -> Result<Self> {
        let s = flags.over(file);
        let codec: CodecId = s.codec.as_deref().unwrap_or("adpcm").parse()?;
        let block_size = s.block_size.unwrap_or(DEFAULT_BLOCK_SIZE);
        let one_block = Packet::header_len(codec) + codec.encoded_len(block_size);
        let cfg = RunConfig {
            sample_rate: s.sample_rate.unwrap_or(DEFAULT_SAMPLE_RATE),
            block_size,
            resample: s.resample.unwrap_or(false),
            codec,
            // grows past the BLE default when one block would not fit
            mtu: s.mtu.unwrap_or(DEFAULT_MTU.max(one_block)),
            crc: s.crc.unwrap_or(false),
            gate: s.gate.unwrap_or(GateKind::Fixed),
            threshold: s.threshold.unwrap_or(DEFAULT_GATE_THRESHOLD),
            threshold_factor: s.threshold_factor.unwrap_or(DEFAULT_THRESHOLD_FACTOR),
            model: s.model,
            hangover: s.hangover.unwrap_or(DEFAULT_HANGOVER),
            min_len: s.min_len.unwrap_or(DEFAULT_MIN_LEN),
            detector_threshold: s.detector_threshold,
            profile: s.profile.or(env_profile.filter(|p| !p.as_os_str().is_empty())),
            battery: s.battery,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        check_block_size(self.block_size)?;
        let one_block = Packet::header_len(self.codec) + self.codec.encoded_len(self.block_size);
        if self.mtu < one_block {
            return Err(Error::Config(format!(
                "mtu {} cannot hold one {} block ({one_block} bytes with header)",
                self.mtu, self.codec
            )));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config(format!("gate threshold must be positive, got {}", self.threshold)));
        }
        self.gate_state()?;
        if self.hangover == 0 {
            return Err(Error::Config("hangover must be at least one block".into()));
        }
        if let Some(t) = self.detector_threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("detector threshold {t} outside (0, 1)")));
            }
        }
        Ok(())
    }

    pub fn gate_state(&self) -> Result<GateState> {
        match self.gate {
            GateKind::Fixed => Ok(GateState::fixed()),
            GateKind::Adaptive => GateState::adaptive_from_threshold(self.threshold, self.threshold_factor),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            sample_rate: self.sample_rate,
            block_size: self.block_size,
            hangover: self.hangover,
            min_len: self.min_len,
            detector_threshold: self.detector_threshold,
        }
    }
}
