use rand::Rng;

use crate::rng::complex_gaussian;
use crate::signal::ComplexEnvelope;

/// The 12.5 GHz channel grid, the default OSNR reference bandwidth.
pub const OSNR_REF_BANDWIDTH_HZ: f64 = 12.5e9;

/// Adds ASE as white circular Gaussian noise. The noise power falling in
/// `ref_bandwidth_hz` is the signal's mean power divided by the OSNR; an
/// infinite OSNR returns the input unchanged.
pub fn add_optical_noise<R: Rng + ?Sized>(
    signal: &ComplexEnvelope,
    osnr_db: f64,
    ref_bandwidth_hz: f64,
    rng: &mut R,
) -> ComplexEnvelope {
    if osnr_db == f64::INFINITY {
        return signal.clone();
    }
    let p_ref = signal.mean_power() / 10f64.powf(osnr_db / 10.0);
    let p_total = p_ref * signal.sample_rate_hz / ref_bandwidth_hz;
    let noise = complex_gaussian(rng, signal.len(), p_total);
    ComplexEnvelope {
        samples: signal.samples.iter().zip(noise).map(|(s, n)| s + n).collect(),
        ..signal.clone()
    }
}
