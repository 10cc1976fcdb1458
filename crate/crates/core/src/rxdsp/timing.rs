//! Square-law spectral-line timing recovery at two samples per symbol.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::ComplexEnvelope;
use crate::spectral;

pub const MIN_TIMING_SAMPLES: usize = 4096;

/// Symbol-rate tone of |x(t)|^2 evaluated in the frequency domain.
///
/// At 2 samples/symbol the symbol-rate line sits exactly at the Nyquist
/// frequency of the sampled |x|^2, where the two sidebands alias onto each
/// other and the phase is lost. The product X(f) X*(f - 1/T), summed over
/// positive f only, keeps just the +1/T line.
pub fn timing_line(x: &[Complex64]) -> Result<Complex64> {
    let n = x.len();
    if n < MIN_TIMING_SAMPLES {
        return Err(Error::InsufficientLength {
            needed: MIN_TIMING_SAMPLES,
            got: n,
        });
    }
    let n = n - n % 2;
    let mut spec = x[..n].to_vec();
    spectral::fft(&mut spec);
    let half = n / 2;
    Ok((1..half).map(|k| spec[k] * spec[k + half].conj()).sum())
}

/// Symbol-timing delay of the signal in symbol periods, in [-0.5, 0.5).
pub fn estimate_timing(x: &[Complex64]) -> Result<f64> {
    let c = timing_line(x)?;
    Ok(-c.arg() / (2.0 * PI))
}

/// Moves the symbol instants onto the even samples. Returns the corrected
/// signal and the removed delay in symbols.
pub fn timing_recovery(signal: &ComplexEnvelope) -> Result<(ComplexEnvelope, f64)> {
    let tau = estimate_timing(&signal.samples)?;
    let shift = -2.0 * tau;
    Ok((
        ComplexEnvelope {
            samples: spectral::delay_circular(&signal.samples, shift),
            sample_rate_hz: signal.sample_rate_hz,
            delay_samples: signal.delay_samples + shift,
        },
        tau,
    ))
}
