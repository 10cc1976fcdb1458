//! The named experiments. Each returns its rows, a JSON summary and the
//! checks it makes on its own results.

pub mod budget;
pub mod drift;
pub mod grid;
pub mod sweep;
pub mod taps;

use serde_json::json;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;
use crate::output::{to_csv, ExperimentOutput};
use crate::pipeline::with_pool;

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let config_hash = cfg.hash()?;
    let out = |csv, summary, taps, assertions| ExperimentOutput {
        experiment: cfg.experiment,
        config_hash: config_hash.clone(),
        csv,
        summary,
        taps,
        assertions,
    };
    with_pool(cfg.parallel, || match cfg.experiment {
        Experiment::BerGrid => {
            let g = grid::run_ber_grid(cfg)?;
            Ok(out(
                g.report.to_csv()?,
                grid::grid_summary(&g.report),
                Some(serde_json::to_value(&g.taps)?),
                grid::grid_assertions(&g.report),
            ))
        }
        Experiment::BackwardPowerSweep => {
            let rows = sweep::run_backward_power_sweep(cfg)?;
            Ok(out(
                to_csv(&rows)?,
                sweep::sweep_summary(&rows, cfg.symbols),
                None,
                sweep::sweep_assertions(&rows, cfg.symbols),
            ))
        }
        Experiment::TapCountSweep => {
            let rows = taps::run_tap_count_sweep(cfg)?;
            Ok(out(to_csv(&rows)?, taps::tap_summary(&rows), None, taps::tap_assertions(&rows)))
        }
        Experiment::DriftTracking => {
            let r = drift::run_drift_tracking(cfg)?;
            Ok(out(
                to_csv(&r.rows)?,
                drift::drift_summary(&r),
                None,
                drift::drift_assertions(&r, cfg.drift_tracking.tracking_limit_rad_per_s),
            ))
        }
        Experiment::BudgetCheck => {
            let (rows, headline) = budget::run_budget_check(cfg)?;
            Ok(out(
                to_csv(&rows)?,
                budget::budget_summary(&rows, &headline),
                None,
                budget::budget_assertions(&rows),
            ))
        }
        Experiment::ComplexityTable => {
            let rows = budget::run_complexity_table(cfg)?;
            Ok(out(
                to_csv(&rows)?,
                json!({ "rows": rows }),
                None,
                budget::complexity_assertions(&rows),
            ))
        }
    })
}
