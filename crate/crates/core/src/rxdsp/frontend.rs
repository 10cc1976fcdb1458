use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{check_aligned, ComplexEnvelope};
use crate::spectral;

/// Impairments shared by the four modes of a group: one transmit laser and
/// one LO, one ADC clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct FrontEndImpairments {
    pub freq_offset_hz: f64,
    /// Combined transmitter and LO linewidth.
    pub laser_linewidth_hz: f64,
    pub timing_offset_samples: f64,
}

impl Default for FrontEndImpairments {
    fn default() -> Self {
        Self {
            freq_offset_hz: 25e6,
            laser_linewidth_hz: 100e3,
            timing_offset_samples: 0.3,
        }
    }
}

impl FrontEndImpairments {
    pub fn none() -> Self {
        Self {
            freq_offset_hz: 0.0,
            laser_linewidth_hz: 0.0,
            timing_offset_samples: 0.0,
        }
    }
}

/// Wiener phase walk starting at 0 with increment variance 2 pi lw Ts.
pub fn wiener_phase<R: Rng + ?Sized>(n: usize, linewidth_hz: f64, sample_period_s: f64, rng: &mut R) -> Vec<f64> {
    let sigma = (2.0 * PI * linewidth_hz * sample_period_s).sqrt();
    let mut phi = 0.0;
    (0..n)
        .map(|k| {
            if k > 0 && sigma > 0.0 {
                let z: f64 = rng.sample(StandardNormal);
                phi += sigma * z;
            }
            phi
        })
        .collect()
}

/// Applies frequency offset, laser phase noise and a fractional sampling
/// offset (band-limited, circular) to every signal of a group.
pub fn apply_front_end<R: Rng + ?Sized>(
    signals: &[ComplexEnvelope],
    imp: &FrontEndImpairments,
    rng: &mut R,
) -> Result<Vec<ComplexEnvelope>> {
    let refs: Vec<&ComplexEnvelope> = signals.iter().collect();
    let (n, fs) = check_aligned(&refs)?;
    if !(imp.laser_linewidth_hz >= 0.0) {
        return Err(Error::InvalidConfig("linewidth must be >= 0".into()));
    }
    let phase = wiener_phase(n, imp.laser_linewidth_hz, 1.0 / fs, rng);
    let rot: Vec<Complex64> = phase
        .iter()
        .enumerate()
        .map(|(k, p)| Complex64::from_polar(1.0, 2.0 * PI * imp.freq_offset_hz * k as f64 / fs + p))
        .collect();
    Ok(signals
        .iter()
        .map(|s| {
            let mut x: Vec<Complex64> = s.samples.iter().zip(&rot).map(|(a, r)| a * r).collect();
            if imp.timing_offset_samples != 0.0 {
                x = spectral::delay_circular(&x, imp.timing_offset_samples);
            }
            ComplexEnvelope {
                samples: x,
                sample_rate_hz: fs,
                delay_samples: s.delay_samples + imp.timing_offset_samples,
            }
        })
        .collect())
}
