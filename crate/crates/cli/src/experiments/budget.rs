use num_rational::Ratio;
use serde::Serialize;
use serde_json::json;

use sdmlink::metrics::{capacity, power_budget, rncm_per_bit, spectral_efficiency, table2_ledger, BudgetResult, DEFAULT_SENSITIVITY_DBM};
use sdmlink::rng::{complex_gaussian, derive_seed, stream, tag};
use sdmlink::rxdsp::{mimo_equalize, CountingMul, EqualizerConfig, MimoEqualizerState};
use sdmlink::txgen::QamSymbolMap;
use sdmlink::Complex64;

use crate::config::{ExperimentConfig, SystemVariant};
use crate::error::Result;
use crate::output::Assertion;

fn f(q: Ratio<i128>) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetRow {
    pub label: String,
    pub received_dbm: f64,
    pub sensitivity_dbm: f64,
    pub below_sensitivity: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Headline {
    /// Exact values as reduced fractions.
    pub se_raw: String,
    pub se_net: String,
    pub capacity_raw_bps: String,
    pub capacity_net_bps: String,
    pub se_raw_f64: f64,
    pub se_net_f64: f64,
    pub capacity_raw_tbps: f64,
    pub capacity_net_tbps: f64,
}

pub fn run_budget_check(cfg: &ExperimentConfig) -> Result<(Vec<BudgetRow>, Option<Headline>)> {
    let rows = table2_ledger()
        .iter()
        .map(|l| power_budget(l, DEFAULT_SENSITIVITY_DBM))
        .collect::<sdmlink::Result<Vec<BudgetResult>>>()?
        .into_iter()
        .map(|r| BudgetRow {
            label: r.label,
            received_dbm: r.received_dbm,
            sensitivity_dbm: DEFAULT_SENSITIVITY_DBM,
            below_sensitivity: r.below_sensitivity,
        })
        .collect();
    let headline = match cfg.complexity.first() {
        Some(v) => {
            let (raw, net) = spectral_efficiency(&v.se)?;
            let (craw, cnet) = capacity(&v.se)?;
            Some(Headline {
                se_raw: raw.to_string(),
                se_net: net.to_string(),
                capacity_raw_bps: craw.to_string(),
                capacity_net_bps: cnet.to_string(),
                se_raw_f64: f(raw),
                se_net_f64: f(net),
                capacity_raw_tbps: f(craw) / 1e12,
                capacity_net_tbps: f(cnet) / 1e12,
            })
        }
        None => None,
    };
    Ok((rows, headline))
}

pub fn budget_assertions(rows: &[BudgetRow]) -> Vec<Assertion> {
    let below: Vec<&str> = rows.iter().filter(|r| r.below_sensitivity).map(|r| r.label.as_str()).collect();
    vec![Assertion::new(
        "every received power above the receiver sensitivity",
        below.is_empty(),
        if below.is_empty() {
            format!("{} rows", rows.len())
        } else {
            below.join(", ")
        },
    )]
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexityRow {
    pub name: String,
    pub mimo_size: usize,
    pub taps: usize,
    pub bits_per_symbol: u64,
    /// Closed form, as a reduced fraction.
    pub rncm_per_bit: String,
    /// From counting the equalizer's filtering multiplications.
    pub rncm_counted: String,
    pub rncm_per_bit_f64: f64,
    pub se_net: f64,
    pub se_net_per_direction: f64,
}

/// Multiplications per bit of the reference equalizer on random input.
pub fn counted_rncm(m: usize, n_taps: usize, bits: usize, seed: u64) -> Result<Ratio<i128>> {
    let cfg = EqualizerConfig { n_taps, ..EqualizerConfig::default() };
    let mut st = MimoEqualizerState::new(m, &cfg, &QamSymbolMap::star_8qam())?;
    let n_sym = 2000;
    let mut r = stream(seed, &[]);
    let x: Vec<Vec<Complex64>> = (0..m).map(|_| complex_gaussian(&mut r, 2 * n_sym, 1.0)).collect();
    let refs: Vec<&[Complex64]> = x.iter().map(|v| v.as_slice()).collect();
    let mut c = CountingMul::default();
    mimo_equalize(&refs, &mut st, &cfg, &mut c)?;
    Ok(Ratio::new(c.muls as i128, (m * n_sym * bits) as i128))
}

fn complexity_row(v: &SystemVariant, seed: u64) -> Result<ComplexityRow> {
    let b = v.se.bits_per_symbol as usize;
    let closed = rncm_per_bit(v.mimo_size, v.taps, b)?;
    let counted = counted_rncm(v.mimo_size, v.taps, b, seed)?;
    let (_, net) = spectral_efficiency(&v.se)?;
    Ok(ComplexityRow {
        name: v.name.clone(),
        mimo_size: v.mimo_size,
        taps: v.taps,
        bits_per_symbol: v.se.bits_per_symbol,
        rncm_per_bit: closed.to_string(),
        rncm_counted: counted.to_string(),
        rncm_per_bit_f64: f(closed),
        se_net: f(net),
        se_net_per_direction: f(net) / v.se.n_directions as f64,
    })
}

pub fn run_complexity_table(cfg: &ExperimentConfig) -> Result<Vec<ComplexityRow>> {
    cfg.complexity
        .iter()
        .enumerate()
        .map(|(i, v)| complexity_row(v, derive_seed(cfg.seed, &[tag("complexity"), i as u64])))
        .collect()
}

pub fn complexity_assertions(rows: &[ComplexityRow]) -> Vec<Assertion> {
    rows.iter()
        .map(|r| {
            Assertion::new(
                format!("{}: counted multiplications match the closed form", r.name),
                r.rncm_counted == r.rncm_per_bit,
                format!("{} vs {}", r.rncm_counted, r.rncm_per_bit),
            )
        })
        .collect()
}

pub fn budget_summary(rows: &[BudgetRow], headline: &Option<Headline>) -> serde_json::Value {
    json!({ "rows": rows, "headline": headline })
}
