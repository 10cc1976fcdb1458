//! Blind coherent receiver for one 4-mode group: matched filter, timing
//! recovery, MIMO equalization, frequency offset and carrier phase
//! estimation, then symbol decisions. Nothing here sees transmitted data.

mod cpe;
mod foe;
mod frontend;
mod mimo;
mod timing;

pub use cpe::{carrier_phase_estimate, CpeConfig};
pub use foe::{freq_offset_estimate, remove_frequency_offset, FoeConfig};
pub use frontend::{apply_front_end, wiener_phase, FrontEndImpairments};
pub use mimo::{mimo_equalize, CountingMul, EqualizerConfig, MimoEqualizerState, MulCounter, NoCount, Stage};
pub use timing::{estimate_timing, timing_line, timing_recovery, MIN_TIMING_SAMPLES};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::snr_evm;
use crate::signal::{check_aligned, ComplexEnvelope};
use crate::txgen::{labels_to_bits, PulseShaper, QamSymbolMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct DspConfig {
    pub symbol_rate_hz: f64,
    pub roll_off: f64,
    pub span_symbols: usize,
    pub timing_recovery: bool,
    /// Frame length in symbols. When set, outputs are cut to the frame
    /// (located from the signals' latency metadata) minus `edge_guard_symbols`
    /// at each end.
    pub payload_symbols: Option<usize>,
    pub edge_guard_symbols: usize,
    pub equalizer: EqualizerConfig,
    pub foe: FoeConfig,
    pub cpe: CpeConfig,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            symbol_rate_hz: 12e9,
            roll_off: PulseShaper::DEFAULT_ROLL_OFF,
            span_symbols: PulseShaper::DEFAULT_SPAN,
            timing_recovery: true,
            payload_symbols: None,
            edge_guard_symbols: 16,
            equalizer: EqualizerConfig::default(),
            foe: FoeConfig::default(),
            cpe: CpeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DspReport {
    /// The equalizer left its acquisition stage.
    pub converged: bool,
    pub stage_switch_symbol: Option<usize>,
    pub guard_resets: usize,
    pub timing_offsets_symbols: Vec<f64>,
    pub freq_offset_estimate_hz: f64,
    /// Estimate minus the true offset; filled in by callers that know it.
    pub residual_freq_offset_hz: Option<f64>,
    /// Mean decision-directed EVM over the outputs.
    pub evm_percent: f64,
    pub snr_db: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DspOutput {
    /// Phase-corrected, unit-power symbols per output.
    pub symbols: Vec<Vec<Complex64>>,
    pub bits: Vec<Vec<u8>>,
    pub report: DspReport,
    pub equalizer: MimoEqualizerState,
}

/// Minimum-distance labels, unpacked to bits MSB first.
pub fn demap_decide(symbols: &[Complex64], map: &QamSymbolMap) -> Vec<u8> {
    let labels: Vec<u8> = symbols.iter().map(|s| map.decide(*s)).collect();
    labels_to_bits(&labels)
}

/// Scales a stream by the least-squares gain against its own decisions.
fn normalize_dd(y: &[Complex64], map: &QamSymbolMap) -> Vec<Complex64> {
    let p = crate::signal::mean_power(y);
    if p == 0.0 {
        return y.to_vec();
    }
    let z: Vec<Complex64> = y.iter().map(|v| v / p.sqrt()).collect();
    let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
    for v in &z {
        let a = map.point(map.decide(*v));
        num += v * a.conj();
        den += a.norm_sqr();
    }
    let g = num.norm() / den;
    z.iter().map(|v| v / g).collect()
}

/// Runs the full chain on the received fields of one group.
pub fn receive(signals: &[ComplexEnvelope], map: &QamSymbolMap, cfg: &DspConfig) -> Result<DspOutput> {
    receive_with_state(signals, map, cfg, None)
}

/// As [`receive`], continuing from a previous equalizer state when given
/// (no pre-convergence pass in that case).
pub fn receive_with_state(
    signals: &[ComplexEnvelope],
    map: &QamSymbolMap,
    cfg: &DspConfig,
    state: Option<MimoEqualizerState>,
) -> Result<DspOutput> {
    let refs: Vec<&ComplexEnvelope> = signals.iter().collect();
    let (_, fs) = check_aligned(&refs)?;
    if (fs - 2.0 * cfg.symbol_rate_hz).abs() > 1e-6 * fs {
        return Err(Error::InvalidConfig(format!(
            "receiver expects 2 samples/symbol, got {fs} Sa/s at {} Bd",
            cfg.symbol_rate_hz
        )));
    }
    let shaper = PulseShaper::new(cfg.roll_off, 2, cfg.span_symbols, cfg.symbol_rate_hz)?;
    let mut ports: Vec<ComplexEnvelope> = signals.iter().map(|s| shaper.matched_filter(s)).collect();

    // Common gain keeps the port mixture's geometry intact.
    let p = ports.iter().map(|s| s.mean_power()).sum::<f64>() / ports.len() as f64;
    if p > 0.0 {
        let g = 1.0 / p.sqrt();
        ports.iter_mut().for_each(|s| s.samples.iter_mut().for_each(|v| *v *= g));
    }

    let mut timing = vec![0.0; ports.len()];
    if cfg.timing_recovery {
        for (s, t) in ports.iter_mut().zip(&mut timing) {
            let (corrected, tau) = timing_recovery(s)?;
            *s = corrected;
            *t = tau;
        }
    }

    let m = ports.len();
    let inputs: Vec<&[Complex64]> = ports.iter().map(|s| s.samples.as_slice()).collect();
    let mut eq = match state {
        Some(s) => s,
        None => {
            let mut s = MimoEqualizerState::new(m, &cfg.equalizer, map)?;
            let pre = (2 * cfg.equalizer.preconverge_symbols).min(inputs[0].len());
            if pre > 0 {
                let head: Vec<&[Complex64]> = inputs.iter().map(|x| &x[..pre]).collect();
                mimo_equalize(&head, &mut s, &cfg.equalizer, &mut NoCount)?;
            }
            s.snapshots.clear();
            s
        }
    };
    let mut eq_out = mimo_equalize(&inputs, &mut eq, &cfg.equalizer, &mut NoCount)?;
    if let Some(payload) = cfg.payload_symbols {
        let d = ports.iter().map(|s| s.delay_samples).sum::<f64>() / m as f64;
        let start = ((d / 2.0).round().max(0.0) as usize + cfg.edge_guard_symbols).min(eq_out[0].len());
        let end = ((d / 2.0).round().max(0.0) as usize + payload)
            .saturating_sub(cfg.edge_guard_symbols)
            .clamp(start, eq_out[0].len());
        for y in &mut eq_out {
            y.truncate(end);
            y.drain(..start);
        }
    }

    let streams: Vec<&[Complex64]> = eq_out.iter().map(|v| v.as_slice()).collect();
    let df = freq_offset_estimate(&streams, cfg.symbol_rate_hz, &cfg.foe)?;
    let mut symbols = Vec::with_capacity(m);
    let mut bits = Vec::with_capacity(m);
    let mut snr = Vec::with_capacity(m);
    let mut evm_sum = 0.0;
    for y in &eq_out {
        let mut y = remove_frequency_offset(y, df, cfg.symbol_rate_hz);
        let p = crate::signal::mean_power(&y);
        if p > 0.0 {
            y.iter_mut().for_each(|v| *v /= p.sqrt());
        }
        let (y, _) = carrier_phase_estimate(&y, map, &cfg.cpe)?;
        let y = normalize_dd(&y, map);
        let (s, e) = snr_evm(&y, map);
        snr.push(s);
        evm_sum += e;
        bits.push(demap_decide(&y, map));
        symbols.push(y);
    }
    Ok(DspOutput {
        symbols,
        bits,
        report: DspReport {
            converged: eq.stage_switch_symbol.is_some(),
            stage_switch_symbol: eq.stage_switch_symbol,
            guard_resets: eq.guard_resets,
            timing_offsets_symbols: timing,
            freq_offset_estimate_hz: df,
            residual_freq_offset_hz: None,
            evm_percent: evm_sum / m as f64,
            snr_db: snr,
        },
        equalizer: eq,
    })
}
