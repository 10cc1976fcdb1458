//! Ground-truth-aware measurement: BER with blind alignment, SNR/EVM,
//! spectral efficiency and capacity, equalizer complexity, power budget.

mod ber;
mod budget;
mod report;
mod se;

pub use ber::{
    align_and_ber, align_group, error_flags, wilson_interval, windowed_ber, AlignedBer, BerConfig, MIN_BER_BITS,
};
pub use budget::{power_budget, table2_ledger, BudgetResult, PowerBudgetLedger, DEFAULT_SENSITIVITY_DBM};
pub use report::{LinkReport, LinkRow, FEC_THRESHOLD};
pub use se::{capacity, rncm_per_bit, spectral_efficiency, SeConfig};

use num_complex::Complex64;

use crate::txgen::QamSymbolMap;

/// Decision-directed SNR (dB) and EVM (%). The input is first scaled by its
/// least-squares gain against its own decisions, so the result does not
/// depend on the input scale. SNR is `-20 log10(EVM)`, which is Es/N0 for
/// circular Gaussian errors; error-free input gives `+inf`.
pub fn snr_evm(symbols: &[Complex64], map: &QamSymbolMap) -> (f64, f64) {
    if symbols.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let p = crate::signal::mean_power(symbols);
    if p == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mut g = p.sqrt();
    let mut refs = Vec::with_capacity(symbols.len());
    for _ in 0..2 {
        refs.clear();
        refs.extend(symbols.iter().map(|y| map.point(map.decide(y / g))));
        let num: Complex64 = symbols.iter().zip(&refs).map(|(y, a)| y * a.conj()).sum();
        let den: f64 = refs.iter().map(|a| a.norm_sqr()).sum();
        g = num.norm() / den;
    }
    let scaled: Vec<Complex64> = symbols.iter().map(|y| y / g).collect();
    evm_against(&scaled, &refs)
}

/// Data-aided SNR (dB) and EVM (%) against known reference symbols, after a
/// complex least-squares gain fit.
pub fn snr_evm_data_aided(symbols: &[Complex64], reference: &[Complex64]) -> (f64, f64) {
    let n = symbols.len().min(reference.len());
    let (y, a) = (&symbols[..n], &reference[..n]);
    let num: Complex64 = y.iter().zip(a).map(|(y, a)| y * a.conj()).sum();
    let den: f64 = a.iter().map(|a| a.norm_sqr()).sum();
    if n == 0 || den == 0.0 || num.norm() == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let h = num / den;
    let scaled: Vec<Complex64> = y.iter().map(|v| v / h).collect();
    evm_against(&scaled, a)
}

fn evm_against(y: &[Complex64], a: &[Complex64]) -> (f64, f64) {
    let err: f64 = y.iter().zip(a).map(|(y, a)| (y - a).norm_sqr()).sum();
    let sig: f64 = a.iter().map(|a| a.norm_sqr()).sum();
    let evm = (err / sig).sqrt();
    let snr = if evm == 0.0 { f64::INFINITY } else { -20.0 * evm.log10() };
    (snr, 100.0 * evm)
}
