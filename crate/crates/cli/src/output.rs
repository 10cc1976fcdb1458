use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;

/// A named check an experiment makes on its own results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// What a run hands to the writer: the flat table, a JSON summary, the
/// converged taps (when the experiment has them) and its checks.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub experiment: Experiment,
    pub config_hash: String,
    pub csv: String,
    pub summary: Value,
    pub taps: Option<Value>,
    pub assertions: Vec<Assertion>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn report(&self, cfg: &ExperimentConfig) -> Result<String> {
        let v = json!({
            "experiment": self.experiment.name(),
            "seed": cfg.seed,
            "config_hash": self.config_hash,
            "config": serde_json::to_value(cfg)?,
            "passed": self.passed(),
            "assertions": self.assertions,
            "summary": self.summary,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }

    /// Writes results.csv, report.json and (if present) taps.json into the
    /// configured directory and nowhere else.
    pub fn write(&self, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        let dir = Path::new(&cfg.output.dir);
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: &str| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            written.push(p);
            Ok(())
        };
        put(&cfg.output.results_csv, &self.csv)?;
        put(&cfg.output.report_json, &self.report(cfg)?)?;
        if let Some(t) = &self.taps {
            put(&cfg.output.taps_json, &serde_json::to_string(t)?)?;
        }
        Ok(written)
    }
}

/// Serializes rows with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
