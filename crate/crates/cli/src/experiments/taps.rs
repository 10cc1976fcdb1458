use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use sdmlink::metrics::FEC_THRESHOLD;
use sdmlink::rxdsp::{DspConfig, EqualizerConfig};
use sdmlink::{Direction, ModeId};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::Assertion;
use crate::pipeline::{noise_over_signal, Simulator};

#[derive(Debug, Clone, Serialize)]
pub struct TapRow {
    pub n_taps: usize,
    pub mean_ber: f64,
    pub max_ber: f64,
    /// Modes whose output locked to a reference.
    pub locked: usize,
    pub pass: bool,
}

/// One received group, equalized with each tap count. The link and noise
/// realization are shared by all tap counts.
pub fn run_tap_count_sweep(cfg: &ExperimentConfig) -> Result<Vec<TapRow>> {
    let sim = Simulator::new(cfg)?;
    let t = &cfg.tap_sweep;
    if sim.profile.mg_index(t.mode_group).is_none() || t.core == 0 || t.core as usize > sim.profile.cores {
        return Err(CliError::Config(format!("tap sweep group c{} |l|={} is not simulated", t.core, t.mode_group)));
    }
    let dir = Direction::Forward;
    let groups: Vec<_> = if t.launch_all_groups {
        sim.profile.mode_groups.iter().map(|&l| (t.core, l)).collect()
    } else {
        vec![(t.core, t.mode_group)]
    };
    let channel = sim.channel(0)?;
    let rg = sim
        .propagate(&channel, 0, dir, &groups)?
        .into_iter()
        .find(|r| r.group == (t.core, t.mode_group))
        .expect("target group was launched");
    let ratios = if cfg.link.rayleigh {
        ModeId::group(t.core, t.mode_group, dir)
            .iter()
            .map(|id| Ok(noise_over_signal(&sim.rb_ratio(*id, sim.full_backward_load(t.core, dir), sim.profile.fresnel_reflectance)?)))
            .collect::<Result<Vec<f64>>>()?
    } else {
        Vec::new()
    };
    let fields = sim.impair(&rg, &ratios, cfg.link.osnr_db, &cfg.link.front_end)?;
    let base = sim.dsp_config();
    let mut rows = t
        .counts
        .par_iter()
        .map(|&n| {
            let dsp = DspConfig {
                equalizer: EqualizerConfig { n_taps: n, ..base.equalizer.clone() },
                ..base.clone()
            };
            let o = sim.measure(&rg, &fields, &dsp);
            let bers: Vec<f64> = o.rows.iter().filter(|r| r.ber.is_finite()).map(|r| r.ber).collect();
            let locked = bers.len();
            TapRow {
                n_taps: n,
                mean_ber: if locked > 0 { bers.iter().sum::<f64>() / locked as f64 } else { f64::NAN },
                max_ber: bers.iter().copied().fold(f64::NAN, f64::max),
                locked,
                pass: o.rows.iter().all(|r| r.pass),
            }
        })
        .collect::<Vec<_>>();
    rows.sort_by_key(|r| r.n_taps);
    Ok(rows)
}

/// Smallest tap count from which every larger count passes.
pub fn knee(rows: &[TapRow]) -> Option<usize> {
    let first_fail_from_top = rows.iter().rposition(|r| !r.pass);
    match first_fail_from_top {
        None => rows.first().map(|r| r.n_taps),
        Some(i) => rows.get(i + 1).map(|r| r.n_taps),
    }
}

pub fn tap_assertions(rows: &[TapRow]) -> Vec<Assertion> {
    let at = |n: usize| rows.iter().find(|r| r.n_taps == n);
    let mut out = Vec::new();
    if let Some(r) = at(15) {
        out.push(Assertion::new(
            "15 taps pass the FEC threshold",
            r.pass,
            format!("max BER {:.4e}, {} locked", r.max_ber, r.locked),
        ));
    }
    if let Some(r) = at(3) {
        out.push(Assertion::new(
            "3 taps fail or lose lock",
            !r.pass,
            format!("max BER {:.4e}, {} locked, threshold {FEC_THRESHOLD}", r.max_ber, r.locked),
        ));
    }
    out
}

pub fn tap_summary(rows: &[TapRow]) -> serde_json::Value {
    json!({ "knee_taps": knee(rows), "rows": rows })
}
