use std::path::Path;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sdmlink::fiberchan::FiberProfile;
use sdmlink::metrics::BerConfig;
use sdmlink::rbnoise::fresnel_reflectance;
use sdmlink::rxdsp::{DspConfig, EqualizerConfig, FrontEndImpairments};
use sdmlink::Direction;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    BerGrid,
    BackwardPowerSweep,
    TapCountSweep,
    DriftTracking,
    BudgetCheck,
    ComplexityTable,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::BerGrid => "ber_grid",
            Experiment::BackwardPowerSweep => "backward_power_sweep",
            Experiment::TapCountSweep => "tap_count_sweep",
            Experiment::DriftTracking => "drift_tracking",
            Experiment::BudgetCheck => "budget_check",
            Experiment::ComplexityTable => "complexity_table",
        }
    }
}

/// Everything one run depends on. Together with the seed it fixes every
/// output byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Master seed; every random draw derives from it.
    pub seed: u64,
    /// Symbols per channel.
    #[serde(default = "defaults::symbols")]
    pub symbols: usize,
    #[serde(default)]
    pub profile: FiberProfile,
    /// 0-based cores of `profile` to simulate. The profile's inter-core
    /// aggregate is kept, so two cores model one neighbour standing in for all.
    #[serde(default = "defaults::cores")]
    pub cores: Vec<usize>,
    #[serde(default = "defaults::directions")]
    pub directions: Vec<Direction>,
    #[serde(default = "defaults::wavelengths")]
    pub wavelengths: u32,
    #[serde(default)]
    pub link: LinkSettings,
    #[serde(default)]
    pub noise: NoiseSettings,
    #[serde(default)]
    pub dsp: DspConfig,
    #[serde(default)]
    pub ber: BerConfig,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub tap_sweep: TapSweepSettings,
    #[serde(default)]
    pub drift_tracking: DriftSettings,
    #[serde(default = "defaults::variants")]
    pub complexity: Vec<SystemVariant>,
    #[serde(default)]
    pub output: OutputPaths,
    /// Worker threads for independent groups; 0 uses all cores.
    #[serde(default)]
    pub parallel: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSettings {
    /// ASE OSNR in 12.5 GHz; `null` disables ASE.
    pub osnr_db: Option<f64>,
    pub front_end: FrontEndImpairments,
    /// Let intra-group mixing drift at the profile's rate while the frame passes.
    pub drift: bool,
    pub drift_block_symbols: usize,
    /// Zero samples after each frame, enough for the largest group delay.
    pub tail_pad_samples: usize,
    /// Inject backscatter from the counter-propagating traffic.
    pub rayleigh: bool,
}

impl Default for LinkSettings {
    fn default() -> Self {
        Self {
            osnr_db: Some(18.0),
            front_end: FrontEndImpairments::default(),
            drift: true,
            drift_block_symbols: 1024,
            tail_pad_samples: 4096,
            rayleigh: true,
        }
    }
}

/// Launch powers and detection parameters of the backscatter model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSettings {
    /// Per-mode launch power of the channel under test.
    pub p_forward_dbm: f64,
    /// Per-mode launch power of every counter-propagating mode in the grid.
    pub p_backward_dbm: f64,
    pub demux_mode_suppression_db: f64,
    pub cmrr_db: Option<f64>,
    pub lo_power_dbm: f64,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            p_forward_dbm: 8.0,
            p_backward_dbm: 8.0,
            demux_mode_suppression_db: 12.0,
            cmrr_db: None,
            lo_power_dbm: 13.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    /// 1-based core and |l| of the forward group under test.
    pub core: u8,
    pub mode_group: u8,
    /// |l| of the backward mode in the `l_F != l_B` scenario.
    pub other_mode_group: u8,
    /// Per-mode backward powers; the no-backward baseline is always added.
    pub backward_power_dbm: Vec<f64>,
    /// Far-facet reflectance used by the sweep (glass-air by default).
    pub fresnel_reflectance: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            core: 1,
            mode_group: 3,
            other_mode_group: 2,
            backward_power_dbm: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0],
            fresnel_reflectance: fresnel_reflectance(1.444),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct TapSweepSettings {
    pub core: u8,
    pub mode_group: u8,
    pub counts: Vec<usize>,
    /// Also launch the other groups of the core. Their crosstalk is noise to
    /// a 4x4 equalizer whatever its length, so it is off by default.
    pub launch_all_groups: bool,
}

impl Default for TapSweepSettings {
    fn default() -> Self {
        Self {
            core: 1,
            mode_group: 3,
            counts: (1..=EqualizerConfig::MAX_TAPS).step_by(2).collect(),
            launch_all_groups: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct DriftSettings {
    pub core: u8,
    pub mode_group: u8,
    /// Drift rates to run, generator radians per second.
    pub rates_rad_per_s: Vec<f64>,
    pub window_symbols: usize,
    /// Independent runs per rate, seeded from the master seed.
    pub runs: usize,
    /// Highest rate for which every window must stay below the FEC threshold;
    /// faster drift is expected to break tracking.
    pub tracking_limit_rad_per_s: f64,
}

impl Default for DriftSettings {
    fn default() -> Self {
        Self {
            core: 1,
            mode_group: 3,
            rates_rad_per_s: vec![0.0, 1.0, 1e6, 1e7],
            window_symbols: 10_000,
            runs: 10,
            tracking_limit_rad_per_s: 1e6,
        }
    }
}

/// One system for the SE-versus-complexity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SystemVariant {
    pub name: String,
    pub mimo_size: usize,
    pub taps: usize,
    pub se: sdmlink::metrics::SeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    pub dir: String,
    pub results_csv: String,
    pub report_json: String,
    pub taps_json: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            results_csv: "results.csv".into(),
            report_json: "report.json".into(),
            taps_json: "taps.json".into(),
        }
    }
}

mod defaults {
    use super::*;
    use sdmlink::metrics::SeConfig;

    pub fn symbols() -> usize {
        200_000
    }
    pub fn cores() -> Vec<usize> {
        vec![0, 1]
    }
    pub fn directions() -> Vec<Direction> {
        vec![Direction::Forward, Direction::Backward]
    }
    pub fn wavelengths() -> u32 {
        1
    }
    pub fn variants() -> Vec<SystemVariant> {
        vec![
            SystemVariant {
                name: "7-core ring-core fiber, OAM groups, 4x4 MIMO".into(),
                mimo_size: 4,
                taps: 15,
                se: SeConfig::default(),
            },
            SystemVariant {
                name: "22-core single-mode fiber, 1x1".into(),
                mimo_size: 1,
                taps: 15,
                se: SeConfig {
                    n_modes_per_direction: 22,
                    n_directions: 1,
                    ..SeConfig::default()
                },
            },
        ]
    }
}

impl ExperimentConfig {
    /// Defaults for `experiment` with the given seed.
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        Self {
            experiment,
            seed,
            symbols: defaults::symbols(),
            profile: FiberProfile::default(),
            cores: defaults::cores(),
            directions: defaults::directions(),
            wavelengths: defaults::wavelengths(),
            link: LinkSettings::default(),
            noise: NoiseSettings::default(),
            dsp: DspConfig::default(),
            ber: BerConfig::default(),
            sweep: SweepSettings::default(),
            tap_sweep: TapSweepSettings::default(),
            drift_tracking: DriftSettings::default(),
            complexity: defaults::variants(),
            output: OutputPaths::default(),
            parallel: 0,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> Result<String> {
        let s = serde_json::to_string(self)?;
        Ok(Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
    }

    /// The profile cut down to the simulated cores.
    pub fn simulated_profile(&self) -> Result<FiberProfile> {
        Ok(self.profile.restricted_to(&self.cores)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.profile.validate()?;
        self.simulated_profile()?;
        self.dsp.equalizer.validate()?;
        if self.symbols == 0 {
            return bad("symbols must be >= 1".into());
        }
        if self.directions.is_empty() {
            return bad("at least one direction is required".into());
        }
        if self.wavelengths == 0 {
            return bad("wavelengths must be >= 1".into());
        }
        if let Some(o) = self.link.osnr_db {
            if !o.is_finite() {
                return bad("osnr_db must be finite or null".into());
            }
        }
        if self.link.drift_block_symbols == 0 {
            return bad("drift_block_symbols must be >= 1".into());
        }
        if !(self.sweep.fresnel_reflectance >= 0.0 && self.sweep.fresnel_reflectance < 1.0) {
            return bad("sweep.fresnel_reflectance must be in [0, 1)".into());
        }
        if self.sweep.backward_power_dbm.iter().any(|p| !p.is_finite()) {
            return bad("sweep powers must be finite".into());
        }
        for &n in &self.tap_sweep.counts {
            let eq = EqualizerConfig { n_taps: n, ..self.dsp.equalizer.clone() };
            eq.validate()?;
        }
        let d = &self.drift_tracking;
        if d.window_symbols == 0 || d.runs == 0 {
            return bad("drift_tracking window and runs must be >= 1".into());
        }
        if d.rates_rad_per_s.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return bad("drift rates must be finite and >= 0".into());
        }
        for v in &self.complexity {
            v.se.validate()?;
            if v.mimo_size == 0 || v.taps == 0 {
                return bad(format!("variant {}: MIMO size and taps must be >= 1", v.name));
            }
        }
        for name in [&self.output.results_csv, &self.output.report_json, &self.output.taps_json] {
            let p = Path::new(name);
            if name.is_empty() || p.components().count() != 1 || p.file_name().is_none() {
                return bad(format!("output file {name:?} must be a bare file name"));
            }
        }
        Ok(())
    }
}

/// JSON schema of [`ExperimentConfig`].
pub fn schema_json() -> Result<String> {
    Ok(serde_json::to_string_pretty(&schemars::schema_for!(ExperimentConfig))?)
}
