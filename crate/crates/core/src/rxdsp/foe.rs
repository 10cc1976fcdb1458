//! Fourth-power spectral-peak frequency offset estimation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct FoeConfig {
    pub min_symbols: usize,
    /// Largest offset searched; may not exceed baud / 8.
    pub search_range_hz: f64,
}

impl Default for FoeConfig {
    fn default() -> Self {
        Self {
            min_symbols: 1 << 14,
            search_range_hz: 1.5e9,
        }
    }
}

/// Estimates the common frequency offset of symbol-rate streams from the
/// peak of the summed spectra of y^4, refined by a parabola through the
/// three bins around the peak.
pub fn freq_offset_estimate(streams: &[&[Complex64]], symbol_rate_hz: f64, cfg: &FoeConfig) -> Result<f64> {
    let limit = symbol_rate_hz / 8.0;
    if !(cfg.search_range_hz > 0.0 && cfg.search_range_hz <= limit) {
        return Err(Error::FrequencyRange {
            requested_hz: cfg.search_range_hz,
            limit_hz: limit,
        });
    }
    let n = streams.iter().map(|s| s.len()).min().unwrap_or(0);
    if n < cfg.min_symbols {
        return Err(Error::InsufficientLength {
            needed: cfg.min_symbols,
            got: n,
        });
    }
    let nfft = spectral::fast_len(4 * n);
    let mut power = vec![0.0; nfft];
    for s in streams {
        let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
        for (b, y) in buf.iter_mut().zip(&s[..n]) {
            *b = (y * y) * (y * y);
        }
        spectral::fft(&mut buf);
        power.iter_mut().zip(&buf).for_each(|(p, v)| *p += v.norm_sqr());
    }
    let max_f4 = 4.0 * cfg.search_range_hz / symbol_rate_hz;
    let (mut best, mut best_p) = (0usize, f64::MIN);
    for (k, p) in power.iter().enumerate() {
        if spectral::bin_frequency(k, nfft).abs() <= max_f4 && *p > best_p {
            best = k;
            best_p = *p;
        }
    }
    let at = |k: isize| power[k.rem_euclid(nfft as isize) as usize];
    let (a, b, c) = (at(best as isize - 1), at(best as isize), at(best as isize + 1));
    let denom = a - 2.0 * b + c;
    let delta = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let f4 = spectral::bin_frequency(best, nfft) + delta / nfft as f64;
    Ok(f4 / 4.0 * symbol_rate_hz)
}

/// Multiplies symbol n by exp(-i 2 pi df n T).
pub fn remove_frequency_offset(y: &[Complex64], df_hz: f64, symbol_rate_hz: f64) -> Vec<Complex64> {
    let w = -2.0 * PI * df_hz / symbol_rate_hz;
    y.iter()
        .enumerate()
        .map(|(n, v)| v * Complex64::from_polar(1.0, w * n as f64))
        .collect()
}
