use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SENSITIVITY_DBM: f64 = -37.0;

/// Launch power followed by an ordered list of signed gains (dB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerBudgetLedger {
    pub label: String,
    pub launch_dbm: f64,
    pub entries: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetResult {
    pub label: String,
    pub received_dbm: f64,
    pub below_sensitivity: bool,
}

fn decimal(x: f64) -> Result<Ratio<i128>> {
    if !x.is_finite() {
        return Err(Error::InvalidConfig(format!("non-finite budget entry {x}")));
    }
    Ratio::approximate_float(x).ok_or_else(|| Error::InvalidConfig(format!("budget entry {x} out of range")))
}

fn to_f64(q: Ratio<i128>) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Sums the ledger in exact rational arithmetic, so the result does not
/// depend on entry order.
pub fn power_budget(ledger: &PowerBudgetLedger, sensitivity_dbm: f64) -> Result<BudgetResult> {
    let mut acc = decimal(ledger.launch_dbm)?;
    for (_, db) in &ledger.entries {
        acc += decimal(*db)?;
    }
    let received_dbm = to_f64(acc);
    Ok(BudgetResult {
        label: ledger.label.clone(),
        received_dbm,
        below_sensitivity: received_dbm < sensitivity_dbm,
    })
}

/// Per-wavelength rows for the three mode groups of the field link.
pub fn table2_ledger() -> Vec<PowerBudgetLedger> {
    let row = |label: &str, launch: f64, mux: f64, fiber: f64| PowerBudgetLedger {
        label: label.into(),
        launch_dbm: launch,
        entries: vec![
            ("mux insertion loss".into(), -mux),
            ("bidirectional split".into(), -3.0),
            ("fiber loss".into(), -fiber),
            ("demux insertion loss".into(), -9.0),
        ],
    };
    vec![
        row("|l|=2", 1.98, 13.0, 1.57),
        row("|l|=3", 1.98, 13.0, 1.58),
        row("|l|=4", 2.98, 14.0, 1.72),
    ]
}
