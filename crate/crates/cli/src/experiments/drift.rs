use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use sdmlink::metrics::{error_flags, windowed_ber, FEC_THRESHOLD};
use sdmlink::rng::{derive_seed, tag};
use sdmlink::txgen::BITS_PER_SYMBOL;
use sdmlink::{Complex64, Direction};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::Assertion;
use crate::pipeline::Simulator;

/// One window of one run.
#[derive(Debug, Clone, Serialize)]
pub struct DriftRow {
    pub drift_rad_per_s: f64,
    pub run: usize,
    pub window: usize,
    /// End of the window, seconds after the first payload symbol.
    pub t_s: f64,
    /// Worst mode of the group; NaN when a mode did not lock.
    pub max_ber: f64,
    /// `||W_k - W_{k-1}|| / ||W_k||` over the window; NaN for the first.
    pub tap_change: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftRun {
    pub drift_rad_per_s: f64,
    pub run: usize,
    pub seed: u64,
    pub locked: bool,
    pub windows: usize,
    pub worst_window_ber: f64,
    pub failed: bool,
    pub final_tap_change: f64,
    /// Mean tap change of the last quarter of windows over the first quarter.
    pub tap_change_trend: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSummary {
    pub drift_rad_per_s: f64,
    pub runs: usize,
    pub failed_runs: usize,
    pub failure_rate: f64,
    pub worst_window_ber: f64,
    /// Median over runs of the last window's tap change.
    pub median_final_tap_change: f64,
    pub median_tap_change_trend: f64,
}

#[derive(Debug, Clone)]
pub struct DriftResult {
    pub rows: Vec<DriftRow>,
    pub runs: Vec<DriftRun>,
    pub rates: Vec<RateSummary>,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt()
}

fn tap_changes(snapshots: &[(usize, Vec<Complex64>)]) -> Vec<f64> {
    snapshots
        .windows(2)
        .map(|w| {
            let d: Vec<Complex64> = w[1].1.iter().zip(&w[0].1).map(|(a, b)| a - b).collect();
            norm(&d) / norm(&w[1].1)
        })
        .collect()
}

fn one_run(cfg: &ExperimentConfig, rate: f64, run: usize) -> Result<(Vec<DriftRow>, DriftRun)> {
    let d = &cfg.drift_tracking;
    let seed = derive_seed(cfg.seed, &[tag("drift_run"), rate.to_bits(), run as u64]);
    let mut rc = cfg.clone();
    rc.seed = seed;
    rc.profile.drift_rad_per_s = rate;
    rc.link.drift = rate > 0.0;
    let sim = Simulator::new(&rc)?;
    let g = (d.core, d.mode_group);
    let channel = sim.channel(0)?;
    let rg = sim.propagate(&channel, 0, Direction::Forward, &[g])?.remove(0);
    let fields = sim.impair(&rg, &[], rc.link.osnr_db, &rc.link.front_end)?;
    let mut dsp = sim.dsp_config();
    dsp.equalizer.snapshot_symbols = d.window_symbols;
    let o = sim.measure(&rg, &fields, &dsp);

    let bits_per_window = d.window_symbols * BITS_PER_SYMBOL;
    let mut per_window: Option<Vec<f64>> = None;
    let mut locked = o.output.is_some();
    if let Some(out) = &o.output {
        for (j, m) in o.aligned.iter().enumerate() {
            let Some((oi, a)) = m else {
                locked = false;
                continue;
            };
            let flags = error_flags(&out.bits[*oi], &rg.refs[j], a)?;
            let w = windowed_ber(&flags, bits_per_window);
            per_window = Some(match per_window {
                None => w,
                Some(p) => p.iter().zip(&w).map(|(x, y)| x.max(*y)).collect(),
            });
        }
    }
    let changes = o.output.as_ref().map(|out| tap_changes(&out.equalizer.snapshots)).unwrap_or_default();
    let bers = per_window.unwrap_or_default();
    let t_window = d.window_symbols as f64 / rc.dsp.symbol_rate_hz;
    let rows: Vec<DriftRow> = (0..if o.output.is_some() { bers.len().max(changes.len() + 1) } else { 0 })
        .map(|k| DriftRow {
            drift_rad_per_s: rate,
            run,
            window: k,
            t_s: (k + 1) as f64 * t_window,
            max_ber: if locked { bers.get(k).copied().unwrap_or(f64::NAN) } else { f64::NAN },
            tap_change: if k == 0 { f64::NAN } else { changes.get(k - 1).copied().unwrap_or(f64::NAN) },
        })
        .collect();
    let worst = if locked { bers.iter().copied().fold(0.0, f64::max) } else { f64::NAN };
    let summary = DriftRun {
        drift_rad_per_s: rate,
        run,
        seed,
        locked,
        windows: bers.len(),
        worst_window_ber: worst,
        failed: !locked || bers.is_empty() || !(worst < FEC_THRESHOLD),
        final_tap_change: changes.last().copied().unwrap_or(f64::NAN),
        tap_change_trend: trend(&changes),
    };
    Ok((rows, summary))
}

/// Last-quarter over first-quarter mean; NaN with fewer than 4 values.
pub fn trend(v: &[f64]) -> f64 {
    let q = v.len() / 4;
    if q == 0 {
        return f64::NAN;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    mean(&v[v.len() - q..]) / mean(&v[..q])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Every configured drift rate, `runs` independent links each. Runs are
/// failures, not errors, when the receiver loses the signal.
pub fn run_drift_tracking(cfg: &ExperimentConfig) -> Result<DriftResult> {
    let d = &cfg.drift_tracking;
    let sim = Simulator::new(cfg)?;
    if sim.profile.mg_index(d.mode_group).is_none() || d.core == 0 || d.core as usize > sim.profile.cores {
        return Err(CliError::Config(format!("drift group c{} |l|={} is not simulated", d.core, d.mode_group)));
    }
    let jobs: Vec<(f64, usize)> = d
        .rates_rad_per_s
        .iter()
        .flat_map(|&r| (0..d.runs).map(move |k| (r, k)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(r, k)| one_run(cfg, r, k))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (r, s) in results {
        rows.extend(r);
        runs.push(s);
    }
    let rates = d
        .rates_rad_per_s
        .iter()
        .map(|&rate| {
            let of: Vec<&DriftRun> = runs.iter().filter(|r| r.drift_rad_per_s == rate).collect();
            let failed = of.iter().filter(|r| r.failed).count();
            RateSummary {
                drift_rad_per_s: rate,
                runs: of.len(),
                failed_runs: failed,
                failure_rate: failed as f64 / of.len() as f64,
                worst_window_ber: of.iter().map(|r| r.worst_window_ber).fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) }),
                median_final_tap_change: median(of.iter().map(|r| r.final_tap_change).collect()),
                median_tap_change_trend: median(of.iter().map(|r| r.tap_change_trend).collect()),
            }
        })
        .collect();
    Ok(DriftResult { rows, runs, rates })
}

pub fn drift_assertions(res: &DriftResult, limit: f64) -> Vec<Assertion> {
    let mut out = Vec::new();
    for r in &res.rates {
        if r.drift_rad_per_s <= limit {
            out.push(Assertion::new(
                format!("drift {} rad/s: every window below the FEC threshold", r.drift_rad_per_s),
                r.failed_runs == 0,
                format!("{}/{} runs failed, worst window BER {:.4e}", r.failed_runs, r.runs, r.worst_window_ber),
            ));
        } else {
            out.push(Assertion::new(
                format!("drift {} rad/s: beyond the tracking limit, tracking fails", r.drift_rad_per_s),
                r.failed_runs > 0,
                format!("failure rate {:.2}", r.failure_rate),
            ));
        }
        if r.drift_rad_per_s == 0.0 {
            // With noise the taps jitter at a floor set by the step size, so
            // only the trend is checked here.
            out.push(Assertion::new(
                "no drift: tap change decreasing",
                r.median_tap_change_trend < 1.0,
                format!(
                    "last/first quarter {:.3}, final {:.3e}",
                    r.median_tap_change_trend, r.median_final_tap_change
                ),
            ));
        }
    }
    out
}

pub fn drift_summary(res: &DriftResult) -> serde_json::Value {
    json!({ "rates": res.rates, "runs": res.runs })
}
