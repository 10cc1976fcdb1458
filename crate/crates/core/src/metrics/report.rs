use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Direction, ModeId, Polarization};

/// 20% soft-decision FEC threshold.
pub const FEC_THRESHOLD: f64 = 2.4e-2;

/// One channel of a grid run. Failed channels keep their ids and carry the
/// failure in `status` with NaN measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRow {
    pub core: u8,
    pub mode_group: u8,
    pub charge: i8,
    pub polarization: Polarization,
    pub wavelength: u32,
    pub direction: Direction,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub snr_db: f64,
    pub evm_percent: f64,
    pub pass: bool,
    pub status: String,
}

impl LinkRow {
    pub fn measured(mode: ModeId, wavelength: u32, ber: f64, ci: (f64, f64), snr_db: f64, evm_percent: f64) -> Self {
        Self {
            core: mode.core,
            mode_group: mode.mode_group(),
            charge: mode.charge,
            polarization: mode.pol,
            wavelength,
            direction: mode.direction,
            ber,
            ci_low: ci.0,
            ci_high: ci.1,
            snr_db,
            evm_percent,
            pass: ci.1 < FEC_THRESHOLD,
            status: "ok".into(),
        }
    }

    pub fn failed(mode: ModeId, wavelength: u32, reason: impl Into<String>) -> Self {
        Self {
            core: mode.core,
            mode_group: mode.mode_group(),
            charge: mode.charge,
            polarization: mode.pol,
            wavelength,
            direction: mode.direction,
            ber: f64::NAN,
            ci_low: f64::NAN,
            ci_high: f64::NAN,
            snr_db: f64::NAN,
            evm_percent: f64::NAN,
            pass: false,
            status: reason.into(),
        }
    }

    fn key(&self) -> (u8, u8, i8, Polarization, u32, Direction) {
        (self.core, self.mode_group, self.charge, self.polarization, self.wavelength, self.direction)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub rows: Vec<LinkRow>,
}

impl LinkReport {
    /// Rows sorted by their ids, so the output does not depend on the order
    /// channels finished in.
    pub fn new(mut rows: Vec<LinkRow>) -> Self {
        rows.sort_by_key(|r| r.key());
        Self { rows }
    }

    pub fn all_pass(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    /// Mean BER of the measured rows in one mode group.
    pub fn mean_ber(&self, mode_group: u8) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.mode_group == mode_group && r.ber.is_finite())
            .map(|r| r.ber)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
