use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use sdmlink::metrics::snr_evm;
use sdmlink::rbnoise::BackwardLaunch;
use sdmlink::{Direction, ModeId};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::Assertion;
use crate::pipeline::{noise_over_signal, ReceivedGroup, Simulator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// One backward mode in the forward group's own mode group.
    SameGroup,
    /// One backward mode in another mode group.
    OtherGroup,
    /// Both of the above at once.
    Multiplexed,
}

pub const SCENARIOS: [Scenario; 3] = [Scenario::SameGroup, Scenario::OtherGroup, Scenario::Multiplexed];

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub scenario: Scenario,
    /// `None` for the no-backward baseline.
    pub p_backward_dbm: Option<f64>,
    /// Forward SNR after the receiver, averaged over the group in linear noise.
    pub measured_snr_db: f64,
    /// Signal over backscatter alone at the detector, same averaging.
    pub analytic_ratio_db: Option<f64>,
}

/// Mean SNR of a group, averaging noise-to-signal linearly.
fn mean_snr_db(snrs: &[f64]) -> f64 {
    let nsr: f64 = snrs.iter().map(|s| 10f64.powf(-s / 10.0)).sum::<f64>() / snrs.len() as f64;
    -10.0 * nsr.log10()
}

fn launches(cfg: &ExperimentConfig, scenario: Scenario, p_dbm: f64) -> Vec<BackwardLaunch> {
    let s = &cfg.sweep;
    // The backward mode carries the first charge of its group.
    let pick = |l: u8| BackwardLaunch {
        mode: ModeId::group(s.core, l, Direction::Backward)[0],
        p_dbm,
    };
    match scenario {
        Scenario::SameGroup => vec![pick(s.mode_group)],
        Scenario::OtherGroup => vec![pick(s.other_mode_group)],
        Scenario::Multiplexed => vec![pick(s.mode_group), pick(s.other_mode_group)],
    }
}

/// Receives the group with the given per-mode backscatter ratios and
/// returns the group SNR. Every point reuses the same noise draws.
fn measure_snr(sim: &Simulator, rg: &ReceivedGroup, ratios: &[f64]) -> Result<f64> {
    let cfg = sim.cfg;
    let fields = sim.impair(rg, ratios, cfg.link.osnr_db, &cfg.link.front_end)?;
    let o = sim.measure(rg, &fields, &sim.dsp_config());
    let out = o
        .output
        .ok_or_else(|| CliError::Config(format!("receiver failed: {}", o.rows[0].status)))?;
    let snrs: Vec<f64> = out.symbols.iter().map(|y| snr_evm(y, &sim.map).0).collect();
    Ok(mean_snr_db(&snrs))
}

pub fn run_backward_power_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let sim = Simulator::new(cfg)?;
    let s = &cfg.sweep;
    for l in [s.mode_group, s.other_mode_group] {
        if sim.profile.mg_index(l).is_none() || s.core == 0 || s.core as usize > sim.profile.cores {
            return Err(CliError::Config(format!("sweep group c{} |l|={l} is not simulated", s.core)));
        }
    }
    if s.mode_group == s.other_mode_group {
        return Err(CliError::Config("sweep mode groups must differ".into()));
    }
    let groups: Vec<_> = sim.profile.mode_groups.iter().map(|&l| (s.core, l)).collect();
    let channel = sim.channel(0)?;
    let received = sim.propagate(&channel, 0, Direction::Forward, &groups)?;
    let rg = received
        .into_iter()
        .find(|r| r.group == (s.core, s.mode_group))
        .expect("target group was launched");
    let targets = ModeId::group(s.core, s.mode_group, Direction::Forward);

    let baseline = measure_snr(&sim, &rg, &[])?;
    let mut rows: Vec<SweepRow> = SCENARIOS
        .iter()
        .map(|&scenario| SweepRow {
            scenario,
            p_backward_dbm: None,
            measured_snr_db: baseline,
            analytic_ratio_db: None,
        })
        .collect();
    let points: Vec<(Scenario, f64)> = SCENARIOS
        .iter()
        .flat_map(|&sc| s.backward_power_dbm.iter().map(move |&p| (sc, p)))
        .collect();
    let measured = points
        .par_iter()
        .map(|&(scenario, p)| -> Result<SweepRow> {
            let ratios = targets
                .iter()
                .map(|id| Ok(noise_over_signal(&sim.rb_ratio(*id, launches(cfg, scenario, p), s.fresnel_reflectance)?)))
                .collect::<Result<Vec<f64>>>()?;
            let analytic: f64 = ratios.iter().sum::<f64>() / ratios.len() as f64;
            Ok(SweepRow {
                scenario,
                p_backward_dbm: Some(p),
                measured_snr_db: measure_snr(&sim, &rg, &ratios)?,
                analytic_ratio_db: Some(-10.0 * analytic.log10()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.extend(measured);
    rows.sort_by(|a, b| {
        (a.scenario as u8, a.p_backward_dbm.unwrap_or(f64::NEG_INFINITY))
            .partial_cmp(&(b.scenario as u8, b.p_backward_dbm.unwrap_or(f64::NEG_INFINITY)))
            .expect("finite powers")
    });
    Ok(rows)
}

/// Three standard errors of a difference of two group SNR estimates (dB),
/// for `n` symbols per output and four outputs.
pub fn snr_tolerance_db(symbols: usize) -> f64 {
    let per_estimate = 10.0 / std::f64::consts::LN_10 / ((4 * symbols) as f64).sqrt();
    3.0 * std::f64::consts::SQRT_2 * per_estimate
}

fn curve(rows: &[SweepRow], sc: Scenario) -> Vec<&SweepRow> {
    rows.iter().filter(|r| r.scenario == sc).collect()
}

pub fn sweep_assertions(rows: &[SweepRow], symbols: usize) -> Vec<Assertion> {
    let tol = snr_tolerance_db(symbols);
    let mut out = Vec::new();
    for sc in SCENARIOS {
        let c = curve(rows, sc);
        let rises: Vec<String> = c
            .windows(2)
            .filter(|w| w[1].measured_snr_db > w[0].measured_snr_db + tol)
            .map(|w| format!("{:?}->{:?} dBm: {:.3} -> {:.3} dB", w[0].p_backward_dbm, w[1].p_backward_dbm, w[0].measured_snr_db, w[1].measured_snr_db))
            .collect();
        out.push(Assertion::new(
            format!("{sc:?}: measured SNR non-increasing with backward power"),
            rises.is_empty(),
            if rises.is_empty() { format!("tolerance {tol:.3} dB") } else { rises.join("; ") },
        ));
        let arises: Vec<_> = c
            .windows(2)
            .filter_map(|w| Some((w[0].analytic_ratio_db?, w[1].analytic_ratio_db?)))
            .filter(|(a, b)| b >= a)
            .collect();
        out.push(Assertion::new(
            format!("{sc:?}: analytic ratio decreasing with backward power"),
            arises.is_empty(),
            format!("{arises:?}"),
        ));
        let over: Vec<String> = c
            .iter()
            .filter_map(|r| Some((r, r.analytic_ratio_db?)))
            .filter(|(r, a)| r.measured_snr_db > a + tol)
            .map(|(r, a)| format!("{:?} dBm: {:.3} > {a:.3}", r.p_backward_dbm, r.measured_snr_db))
            .collect();
        out.push(Assertion::new(
            format!("{sc:?}: measured SNR <= analytic ratio"),
            over.is_empty(),
            over.join("; "),
        ));
    }
    let pairs = |a: Scenario, b: Scenario| -> Vec<(&SweepRow, &SweepRow)> {
        curve(rows, a)
            .into_iter()
            .filter(|r| r.p_backward_dbm.is_some())
            .zip(curve(rows, b).into_iter().filter(|r| r.p_backward_dbm.is_some()))
            .collect()
    };
    let worse: Vec<String> = pairs(Scenario::Multiplexed, Scenario::SameGroup)
        .iter()
        .filter(|(m, s)| m.measured_snr_db > s.measured_snr_db + tol)
        .map(|(m, s)| format!("{:?} dBm: {:.3} > {:.3}", m.p_backward_dbm, m.measured_snr_db, s.measured_snr_db))
        .collect();
    out.push(Assertion::new("multiplexed backward SNR <= single backward SNR", worse.is_empty(), worse.join("; ")));
    let order: Vec<String> = pairs(Scenario::SameGroup, Scenario::OtherGroup)
        .iter()
        .filter(|(s, o)| s.analytic_ratio_db > o.analytic_ratio_db)
        .map(|(s, o)| format!("{:?} dBm: {:?} > {:?}", s.p_backward_dbm, s.analytic_ratio_db, o.analytic_ratio_db))
        .collect();
    out.push(Assertion::new("analytic ratio same group <= other group", order.is_empty(), order.join("; ")));
    out
}

pub fn sweep_summary(rows: &[SweepRow], symbols: usize) -> serde_json::Value {
    json!({
        "snr_tolerance_db": snr_tolerance_db(symbols),
        "rows": rows,
    })
}
