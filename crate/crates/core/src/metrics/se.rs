use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type Q = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct SeConfig {
    pub n_modes_per_direction: u64,
    pub n_directions: u64,
    pub bits_per_symbol: u64,
    pub baud_hz: f64,
    pub grid_hz: f64,
    pub n_wavelengths: u64,
    pub fec_overhead: f64,
}

impl Default for SeConfig {
    /// 7 cores x 6 OAM modes x 2 polarizations, both directions, 40 x 12 GBd.
    fn default() -> Self {
        Self {
            n_modes_per_direction: 84,
            n_directions: 2,
            bits_per_symbol: 3,
            baud_hz: 12e9,
            grid_hz: 12.5e9,
            n_wavelengths: 40,
            fec_overhead: 0.20,
        }
    }
}

fn exact(x: f64, what: &str) -> Result<Q> {
    Q::approximate_float(x).ok_or_else(|| Error::InvalidConfig(format!("{what} = {x} is not representable")))
}

impl SeConfig {
    pub fn validate(&self) -> Result<()> {
        self.rationals().map(|_| ())
    }

    /// Validates and returns (baud, grid, 1 + overhead) as exact rationals.
    /// Decimal inputs such as 0.2 are read as the simplest nearby fraction.
    fn rationals(&self) -> Result<(Q, Q, Q)> {
        if self.n_modes_per_direction == 0 || self.n_directions == 0 || self.bits_per_symbol == 0 {
            return Err(Error::InvalidConfig("mode, direction and bit counts must be positive".into()));
        }
        if !(self.baud_hz > 0.0 && self.grid_hz > 0.0 && self.baud_hz.is_finite() && self.grid_hz.is_finite()) {
            return Err(Error::InvalidConfig("baud and grid must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.fec_overhead) {
            return Err(Error::InvalidConfig(format!("fec_overhead {} outside [0, 1)", self.fec_overhead)));
        }
        Ok((
            exact(self.baud_hz, "baud_hz")?,
            exact(self.grid_hz, "grid_hz")?,
            Q::from_integer(1) + exact(self.fec_overhead, "fec_overhead")?,
        ))
    }

    fn per_symbol_bits(&self) -> Q {
        Q::from_integer((self.n_directions * self.n_modes_per_direction * self.bits_per_symbol) as i128)
    }
}

/// (raw, net) spectral efficiency in bit/s/Hz, exact.
pub fn spectral_efficiency(cfg: &SeConfig) -> Result<(Ratio<i128>, Ratio<i128>)> {
    let (baud, grid, fec) = cfg.rationals()?;
    let raw = cfg.per_symbol_bits() * baud / grid;
    Ok((raw, raw / fec))
}

/// (raw, net) capacity in bit/s, exact.
pub fn capacity(cfg: &SeConfig) -> Result<(Ratio<i128>, Ratio<i128>)> {
    let (baud, _, fec) = cfg.rationals()?;
    let raw = cfg.per_symbol_bits() * Q::from_integer(cfg.n_wavelengths as i128) * baud;
    Ok((raw, raw / fec))
}

/// Complex multiplications per recovered bit of an M x M time-domain
/// equalizer with N taps per sub-filter: each output symbol costs M*N.
/// Adaptation is not counted.
pub fn rncm_per_bit(m: usize, n_taps: usize, bits_per_symbol: usize) -> Result<Ratio<i128>> {
    if m == 0 || n_taps == 0 || bits_per_symbol == 0 {
        return Err(Error::InvalidConfig("M, N and b must be at least 1".into()));
    }
    Ok(Ratio::new((m * n_taps) as i128, bits_per_symbol as i128))
}
