use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::ComplexEnvelope;
use crate::spectral;

/// Root-raised-cosine Nyquist shaper. Transmit and receive each apply one
/// copy, so the end-to-end pulse is a raised cosine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseShaper {
    pub roll_off: f64,
    pub samples_per_symbol: usize,
    pub span_symbols: usize,
    pub symbol_rate_hz: f64,
    /// Unit-energy taps, `span_symbols * samples_per_symbol + 1` long.
    pub taps: Vec<f64>,
}

/// Continuous-time RRC impulse response at `t` symbol periods, peak 1 - b + 4b/pi.
fn rrc(t: f64, beta: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let edge = 1.0 / (4.0 * beta);
    if (t.abs() - edge).abs() < 1e-9 {
        return beta / 2f64.sqrt()
            * ((1.0 + 2.0 / PI) * (PI / (4.0 * beta)).sin()
                + (1.0 - 2.0 / PI) * (PI / (4.0 * beta)).cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

impl PulseShaper {
    pub const DEFAULT_ROLL_OFF: f64 = 0.01;
    pub const DEFAULT_SPAN: usize = 256;

    pub fn new(
        roll_off: f64,
        samples_per_symbol: usize,
        span_symbols: usize,
        symbol_rate_hz: f64,
    ) -> Result<Self> {
        if !(roll_off > 0.0 && roll_off <= 1.0) {
            return Err(Error::InvalidConfig(format!("roll-off {roll_off} outside (0, 1]")));
        }
        if samples_per_symbol < 2 {
            return Err(Error::InvalidConfig("need at least 2 samples per symbol".into()));
        }
        if span_symbols < 2 || span_symbols % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "span {span_symbols} must be even and >= 2"
            )));
        }
        if !(symbol_rate_hz > 0.0) {
            return Err(Error::InvalidConfig("symbol rate must be positive".into()));
        }
        let raw = Self::raw_taps_for(roll_off, samples_per_symbol, span_symbols);
        let energy: f64 = raw.iter().map(|h| h * h).sum();
        let taps = raw.iter().map(|h| h / energy.sqrt()).collect();
        Ok(Self {
            roll_off,
            samples_per_symbol,
            span_symbols,
            symbol_rate_hz,
            taps,
        })
    }

    /// Roll-off 0.01, 2 samples/symbol, 256-symbol span.
    pub fn default_for(symbol_rate_hz: f64) -> Self {
        Self::new(Self::DEFAULT_ROLL_OFF, 2, Self::DEFAULT_SPAN, symbol_rate_hz)
            .expect("default shaper parameters are valid")
    }

    fn raw_taps_for(beta: f64, sps: usize, span: usize) -> Vec<f64> {
        let half = (span * sps / 2) as isize;
        (-half..=half)
            .map(|n| rrc(n as f64 / sps as f64, beta))
            .collect()
    }

    /// Taps of the analytic response before energy normalization.
    pub fn raw_taps(&self) -> Vec<f64> {
        Self::raw_taps_for(self.roll_off, self.samples_per_symbol, self.span_symbols)
    }

    /// Sum of squared raw taps per sample-per-symbol; tends to 1 as the span grows.
    pub fn raw_energy(&self) -> f64 {
        self.raw_taps().iter().map(|h| h * h).sum::<f64>() / self.samples_per_symbol as f64
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.symbol_rate_hz * self.samples_per_symbol as f64
    }

    pub fn group_delay_samples(&self) -> usize {
        self.span_symbols * self.samples_per_symbol / 2
    }

    /// Shaper convolved with its matched filter, sampled at symbol spacing,
    /// centre first then +/-1, +/-2, ... symbols.
    fn cascade_symbol_samples(&self) -> (f64, Vec<f64>) {
        let n = self.taps.len();
        let centre = n - 1;
        let sps = self.samples_per_symbol as isize;
        let mut side = Vec::new();
        let at = |lag: isize| -> f64 {
            // autocorrelation of the symmetric taps
            let l = lag.unsigned_abs();
            (0..n - l.min(n)).map(|i| self.taps[i] * self.taps[i + l]).sum()
        };
        let main = at(0);
        let mut k = 1isize;
        while (k * sps) as usize <= centre {
            side.push(at(k * sps));
            k += 1;
        }
        (main, side)
    }

    /// Total ISI power of the shaper/matched-filter cascade relative to the main tap, dB.
    pub fn cascade_isi_db(&self) -> f64 {
        let (main, side) = self.cascade_symbol_samples();
        let isi: f64 = 2.0 * side.iter().map(|v| v * v).sum::<f64>();
        10.0 * (isi / (main * main)).log10()
    }

    /// Largest single ISI term relative to the main tap, dB.
    pub fn cascade_peak_isi_db(&self) -> f64 {
        let (main, side) = self.cascade_symbol_samples();
        let peak = side.iter().fold(0f64, |m, v| m.max(v.abs()));
        20.0 * (peak / main).log10()
    }

    /// Two-sided width in Hz of the band where |H(f)|^2 is within `level_db`
    /// of its maximum.
    pub fn occupied_bandwidth_hz(&self, level_db: f64) -> f64 {
        let n = 1 << 18;
        let ps = spectral::power_spectrum_real(&self.taps, n);
        let peak = ps.iter().cloned().fold(0.0, f64::max);
        let floor = peak * 10f64.powf(-level_db.abs() / 10.0);
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for (k, p) in ps.iter().enumerate() {
            if *p >= floor {
                let f = spectral::bin_frequency(k, n);
                lo = lo.min(f);
                hi = hi.max(f);
            }
        }
        (hi - lo) * self.sample_rate_hz()
    }

    /// Receive-side matched filter (the same symmetric taps).
    pub fn matched_filter(&self, input: &ComplexEnvelope) -> ComplexEnvelope {
        let samples = spectral::convolve_real(&input.samples, &self.taps);
        ComplexEnvelope {
            samples,
            sample_rate_hz: input.sample_rate_hz,
            delay_samples: input.delay_samples + self.group_delay_samples() as f64,
        }
    }
}

/// Upsamples symbols by the shaper's oversampling factor and filters them.
/// The output is the full convolution; its latency is reported in
/// `delay_samples`.
pub fn pulse_shape(symbols: &[Complex64], shaper: &PulseShaper) -> Result<ComplexEnvelope> {
    if symbols.is_empty() {
        return Err(Error::InvalidConfig("no symbols to shape".into()));
    }
    let sps = shaper.samples_per_symbol;
    let mut up = vec![Complex64::new(0.0, 0.0); symbols.len() * sps];
    for (i, s) in symbols.iter().enumerate() {
        up[i * sps] = *s;
    }
    let samples = spectral::convolve_real(&up, &shaper.taps);
    Ok(ComplexEnvelope {
        samples,
        sample_rate_hz: shaper.sample_rate_hz(),
        delay_samples: shaper.group_delay_samples() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taps_are_linear_phase() {
        let s = PulseShaper::default_for(12e9);
        let n = s.taps.len();
        assert_eq!(n, 513);
        for i in 0..n / 2 {
            assert_eq!(s.taps[i].to_bits(), s.taps[n - 1 - i].to_bits());
        }
    }

    #[test]
    fn cascade_isi_below_40_db() {
        let s = PulseShaper::default_for(12e9);
        assert!(s.cascade_isi_db() < -40.0, "{}", s.cascade_isi_db());
        assert!(s.cascade_peak_isi_db() < -40.0);
    }

    #[test]
    fn short_span_does_not_meet_isi_floor() {
        // The slow tail decay at roll-off 0.01 is why the default span is long.
        let s = PulseShaper::new(0.01, 2, 64, 12e9).unwrap();
        assert!(s.cascade_isi_db() > -40.0);
    }

    #[test]
    fn occupied_bandwidth_within_nyquist_plus_roll_off() {
        let s = PulseShaper::default_for(12e9);
        let bw = s.occupied_bandwidth_hz(20.0);
        assert!(bw <= 12e9 * 1.01, "{bw}");
        assert!(bw > 12e9 * 0.99);
    }

    #[test]
    fn raw_energy_converges_with_span() {
        let e64 = PulseShaper::new(0.01, 2, 64, 12e9).unwrap().raw_energy();
        let e128 = PulseShaper::new(0.01, 2, 128, 12e9).unwrap().raw_energy();
        assert!(((e64 - e128) / e128).abs() < 1e-3, "{e64} {e128}");
        for span in [64, 128, 256] {
            let s = PulseShaper::new(0.01, 2, span, 12e9).unwrap();
            let e: f64 = s.taps.iter().map(|h| h * h).sum();
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_returns_taps() {
        let s = PulseShaper::default_for(12e9);
        let out = pulse_shape(&[Complex64::new(1.0, 0.0)], &s).unwrap();
        assert_eq!(out.delay_samples, 256.0);
        assert_eq!(out.sample_rate_hz, 24e9);
        for (o, t) in out.samples.iter().zip(&s.taps) {
            assert!((o.re - t).abs() < 1e-12 && o.im.abs() < 1e-12);
        }
    }

    #[test]
    fn shaped_then_matched_recovers_symbols() {
        let s = PulseShaper::default_for(12e9);
        let map = crate::txgen::QamSymbolMap::star_8qam();
        let bits: Vec<u8> = {
            let mut g = crate::txgen::PrbsGenerator::new(99).unwrap();
            g.bits(3 * 4000).unwrap()
        };
        let syms = crate::txgen::map_8qam(&bits, &map).unwrap();
        let tx = pulse_shape(&syms, &s).unwrap();
        let rx = s.matched_filter(&tx);
        let d = rx.delay_samples as usize;
        let mut err = 0.0;
        let mut sig = 0.0;
        for (k, a) in syms.iter().enumerate() {
            let y = rx.samples[d + 2 * k];
            err += (y - a).norm_sqr();
            sig += a.norm_sqr();
        }
        assert!(10.0 * (err / sig).log10() < -40.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PulseShaper::new(0.0, 2, 64, 1.0).is_err());
        assert!(PulseShaper::new(0.5, 1, 64, 1.0).is_err());
        assert!(PulseShaper::new(0.5, 2, 63, 1.0).is_err());
        assert!(pulse_shape(&[], &PulseShaper::default_for(1.0)).is_err());
    }
}
