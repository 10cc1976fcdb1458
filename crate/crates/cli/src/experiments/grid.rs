use std::collections::BTreeMap;

use rayon::prelude::*;
use serde_json::json;

use sdmlink::metrics::{LinkReport, LinkRow};
use sdmlink::ModeId;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::Assertion;
use crate::pipeline::{all_groups, noise_over_signal, Simulator};

/// Converged taps as `[out][in][tap] = [re, im]`.
pub type TapSet = Vec<Vec<Vec<[f64; 2]>>>;

#[derive(Debug, Clone)]
pub struct GridResult {
    pub report: LinkReport,
    /// Keyed `c{core}_l{|l|}_{direction}_w{wavelength}`.
    pub taps: BTreeMap<String, TapSet>,
}

/// Every simulated (core, group, direction, wavelength) through the full
/// link and receiver. Failed channels are rows, not errors.
pub fn run_ber_grid(cfg: &ExperimentConfig) -> Result<GridResult> {
    let sim = Simulator::new(cfg)?;
    let groups = all_groups(&sim.profile);
    let dsp = sim.dsp_config();
    let mut rows: Vec<LinkRow> = Vec::new();
    let mut taps = BTreeMap::new();
    for wl in 0..cfg.wavelengths {
        let channel = sim.channel(wl)?;
        for &dir in &cfg.directions {
            let received = sim.propagate(&channel, wl, dir, &groups)?;
            let outcomes: Vec<_> = received
                .par_iter()
                .map(|rg| -> Result<_> {
                    let ratios = if cfg.link.rayleigh {
                        ModeId::group(rg.group.0, rg.group.1, dir)
                            .iter()
                            .map(|id| {
                                let load = sim.full_backward_load(rg.group.0, dir);
                                Ok(noise_over_signal(&sim.rb_ratio(*id, load, sim.profile.fresnel_reflectance)?))
                            })
                            .collect::<Result<Vec<f64>>>()?
                    } else {
                        Vec::new()
                    };
                    let fields = sim.impair(rg, &ratios, cfg.link.osnr_db, &cfg.link.front_end)?;
                    Ok((rg, sim.measure(rg, &fields, &dsp)))
                })
                .collect::<Result<Vec<_>>>()?;
            for (rg, o) in outcomes {
                if let Some(out) = &o.output {
                    let key = format!("c{}_l{}_{}_w{}", sim.physical_core(rg.group.0), rg.group.1, dir, wl);
                    taps.insert(key, out.equalizer.taps_nested());
                }
                rows.extend(o.rows);
            }
        }
    }
    Ok(GridResult {
        report: LinkReport::new(rows),
        taps,
    })
}

pub fn grid_assertions(report: &LinkReport) -> Vec<Assertion> {
    let failed: Vec<String> = report
        .rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("c{} {}{:?} {} w{}: ber {} ({})", r.core, r.charge, r.polarization, r.direction, r.wavelength, r.ber, r.status))
        .collect();
    let mut out = vec![Assertion::new(
        "all channels below the FEC threshold",
        report.all_pass(),
        if failed.is_empty() {
            format!("{} channels", report.rows.len())
        } else {
            failed.join("; ")
        },
    )];
    if let Some(mid) = report.mean_ber(3) {
        for other in [2u8, 4] {
            if let Some(b) = report.mean_ber(other) {
                out.push(Assertion::new(
                    format!("mean BER |l|=3 >= |l|={other}"),
                    mid >= b,
                    format!("{mid:.4e} vs {b:.4e}"),
                ));
            }
        }
    }
    out
}

pub fn grid_summary(report: &LinkReport) -> serde_json::Value {
    let mut groups: Vec<u8> = report.rows.iter().map(|r| r.mode_group).collect();
    groups.sort_unstable();
    groups.dedup();
    let mean: BTreeMap<String, Option<f64>> = groups.iter().map(|&g| (format!("l{g}"), report.mean_ber(g))).collect();
    let worst = report.rows.iter().filter(|r| r.ber.is_finite()).map(|r| r.ber).fold(0.0, f64::max);
    json!({
        "channels": report.rows.len(),
        "failed": report.rows.iter().filter(|r| r.status != "ok").count(),
        "all_pass": report.all_pass(),
        "worst_ber": worst,
        "mean_ber": mean,
        "rows": report,
    })
}
