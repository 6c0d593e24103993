//! Current and battery lifetime model.
//!
//! Currents are averages at the 3 V rail. The per-codec table ships as
//! `data/profile.toml` and the battery parameters as `data/battery.toml`;
//! both can be replaced by files with the same keys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RAIL_VOLTAGE: f64 = 3.0;
pub const PROFILE_VERSION: u32 = 1;

const DEFAULT_PROFILE: &str = include_str!("../data/profile.toml");
const DEFAULT_BATTERY: &str = include_str!("../data/battery.toml");

/// Inputs to [`average_current`]. Currents in mA, powers in mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentProfile {
    pub baseline_ma: f64,
    pub ble_ma: f64,
    pub codec_overhead_ma: f64,
    pub mic_mw: f64,
    pub classifier_mw: f64,
}

impl CurrentProfile {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("baseline_ma", self.baseline_ma),
            ("ble_ma", self.ble_ma),
            ("codec_overhead_ma", self.codec_overhead_ma),
            ("mic_mw", self.mic_mw),
            ("classifier_mw", self.classifier_mw),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Energy(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// One row of the codec table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecCurrent {
    pub name: String,
    pub bitrate_kbps: f64,
    pub overhead_ma: f64,
    pub ble_ma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    pub version: u32,
    pub baseline_ma: f64,
    pub mic_mw: f64,
    pub classifier_mw: f64,
    pub codec: Vec<CodecCurrent>,
}

impl Default for EnergyTable {
    fn default() -> Self {
        Self::from_toml(DEFAULT_PROFILE).expect("bundled profile parses")
    }
}

impl EnergyTable {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: Self = toml::from_str(text).map_err(|e| Error::Energy(format!("profile: {e}")))?;
        if table.version != PROFILE_VERSION {
            return Err(Error::Energy(format!("unsupported profile version {}", table.version)));
        }
        for row in &table.codec {
            table.profile_for(row).validate()?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn row(&self, name: &str) -> Result<&CodecCurrent> {
        self.codec
            .iter()
            .find(|r| r.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Energy(format!("no profile row for codec '{name}'")))
    }

    fn profile_for(&self, row: &CodecCurrent) -> CurrentProfile {
        CurrentProfile {
            baseline_ma: self.baseline_ma,
            ble_ma: row.ble_ma,
            codec_overhead_ma: row.overhead_ma,
            mic_mw: 0.0,
            classifier_mw: 0.0,
        }
    }

    /// Streaming mode: baseline plus radio and codec. The microphone is left
    /// out so that lifetimes compare the data path alone.
    pub fn streaming_profile(&self, codec: &str) -> Result<CurrentProfile> {
        Ok(self.profile_for(self.row(codec)?))
    }

    /// On-node classification with the radio idle.
    pub fn classifier_profile(&self) -> CurrentProfile {
        CurrentProfile {
            baseline_ma: self.baseline_ma,
            ble_ma: 0.0,
            codec_overhead_ma: 0.0,
            mic_mw: self.mic_mw,
            classifier_mw: self.classifier_mw,
        }
    }

    /// Total power while streaming at `voicing`, microphone included.
    pub fn streaming_power_mw(&self, codec: &str, voicing: f64) -> Result<f64> {
        let p = self.streaming_profile(codec)?;
        Ok(self.mic_mw + RAIL_VOLTAGE * average_current(&p, voicing)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryModel {
    pub capacity_mah: f64,
    pub cell_voltage: f64,
    pub rail_voltage: f64,
    pub converter_efficiency: f64,
}

impl Default for BatteryModel {
    fn default() -> Self {
        Self::from_toml(DEFAULT_BATTERY).expect("bundled battery parses")
    }
}

impl BatteryModel {
    pub fn from_toml(text: &str) -> Result<Self> {
        let b: Self = toml::from_str(text).map_err(|e| Error::Energy(format!("battery: {e}")))?;
        b.validate()?;
        Ok(b)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.converter_efficiency > 0.0 && self.converter_efficiency <= 1.0) {
            return Err(Error::Energy(format!(
                "converter efficiency {} outside (0, 1]",
                self.converter_efficiency
            )));
        }
        if !(self.cell_voltage > 0.0 && self.rail_voltage > 0.0) {
            return Err(Error::Energy("voltages must be positive".into()));
        }
        if !(self.capacity_mah > 0.0 && self.capacity_mah.is_finite()) {
            return Err(Error::Energy("capacity must be positive".into()));
        }
        Ok(())
    }

    /// Current drawn from the cell for a given rail current.
    pub fn battery_current(&self, rail_ma: f64) -> f64 {
        rail_ma * self.rail_voltage / (self.cell_voltage * self.converter_efficiency)
    }

    pub fn lifetime_from_battery_current(&self, battery_ma: f64) -> Result<f64> {
        if !(battery_ma > 0.0) {
            return Err(Error::Energy(format!("current must be positive, got {battery_ma} mA")));
        }
        Ok(self.capacity_mah / battery_ma)
    }
}

/// Rail current: baseline, plus radio and codec scaled by the voiced
/// fraction, plus constant loads converted from mW.
pub fn average_current(profile: &CurrentProfile, voicing_fraction: f64) -> Result<f64> {
    profile.validate()?;
    if !(0.0..=1.0).contains(&voicing_fraction) {
        return Err(Error::Energy(format!("voicing fraction {voicing_fraction} outside [0, 1]")));
    }
    Ok(profile.baseline_ma
        + voicing_fraction * (profile.ble_ma + profile.codec_overhead_ma)
        + (profile.mic_mw + profile.classifier_mw) / RAIL_VOLTAGE)
}

pub fn lifetime_hours(battery: &BatteryModel, avg_current_ma_at_rail: f64) -> Result<f64> {
    battery.validate()?;
    if !(avg_current_ma_at_rail > 0.0) {
        return Err(Error::Energy(format!(
            "average current must be positive, got {avg_current_ma_at_rail} mA"
        )));
    }
    battery.lifetime_from_battery_current(battery.battery_current(avg_current_ma_at_rail))
}

pub fn classifier_mode_power(profile: &CurrentProfile) -> f64 {
    profile.mic_mw + profile.classifier_mw
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyEstimate {
    pub codec: String,
    pub voicing_fraction: f64,
    pub rail_current_ma: f64,
    pub battery_current_ma: f64,
    pub lifetime_hours: f64,
}

pub fn estimate(table: &EnergyTable, battery: &BatteryModel, codec: &str, voicing_fraction: f64) -> Result<EnergyEstimate> {
    let rail = average_current(&table.streaming_profile(codec)?, voicing_fraction)?;
    Ok(EnergyEstimate {
        codec: codec.to_ascii_lowercase(),
        voicing_fraction,
        rail_current_ma: rail,
        battery_current_ma: battery.battery_current(rail),
        lifetime_hours: lifetime_hours(battery, rail)?,
    })
}
