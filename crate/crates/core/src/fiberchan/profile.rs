use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optional distributed crosstalk along the fiber, modeled as lumped sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct InlineXt {
    pub enabled: bool,
    /// Adjacent-group coupling per km, negative dB.
    pub db_per_km: f64,
    pub sections: usize,
}

impl Default for InlineXt {
    fn default() -> Self {
        Self {
            enabled: false,
            db_per_km: -35.0,
            sections: 5,
        }
    }
}

/// Physical parameters of the multi-core ring-core link. Per-group tables are
/// indexed `[core][mode group]` in the order of `mode_groups`; per-pair tables
/// by adjacent pair `(mode_groups[i], mode_groups[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct FiberProfile {
    pub length_km: f64,
    pub cores: usize,
    pub mode_groups: Vec<u8>,
    pub atten_db_per_km: Vec<Vec<f64>>,
    pub dgd_ns_per_km: Vec<f64>,
    pub intra_dmd_ps_per_km: Vec<f64>,
    /// Worst-case aggregate inter-group crosstalk inside one core. `null` disables it.
    pub xt_intermg_db: Option<f64>,
    /// Extra suppression per additional step of |l| separation between groups.
    pub xt_intermg_decay_db: f64,
    /// Aggregate crosstalk a group receives from the same group in all other cores.
    pub xt_intercore_db: Option<f64>,
    pub rayleigh_scatter_db_per_km: f64,
    pub recapture_same: f64,
    pub recapture_cross: f64,
    pub fresnel_reflectance: f64,
    pub mux_insertion_loss_db: Vec<f64>,
    pub bidir_split_loss_db: f64,
    pub demux_insertion_loss_db: Vec<f64>,
    /// Generator radians per simulated second for intra-group drift.
    pub drift_rad_per_s: f64,
    /// Backward realization is the transpose of the forward one instead of an independent draw.
    pub reciprocal: bool,
    pub inline_xt: InlineXt,
}

impl Default for FiberProfile {
    fn default() -> Self {
        Self::field_deployed()
    }
}

impl FiberProfile {
    /// The 5-km, 7-core installed-cable profile with groups |l| = 2, 3, 4.
    pub fn field_deployed() -> Self {
        // Core 1 carries the high |l| = 4 loss; the grand mean is 0.32 dB/km.
        let mut atten = vec![vec![0.314, 0.316, 0.344]];
        for mg4 in [0.322, 0.322, 0.324, 0.324, 0.325, 0.325] {
            atten.push(vec![0.316, 0.318, mg4]);
        }
        Self {
            length_km: 5.0,
            cores: 7,
            mode_groups: vec![2, 3, 4],
            atten_db_per_km: atten,
            dgd_ns_per_km: vec![5.0, 5.0],
            intra_dmd_ps_per_km: vec![50.0, 50.0, 50.0],
            xt_intermg_db: Some(-12.0),
            xt_intermg_decay_db: 10.0,
            xt_intercore_db: Some(-20.0),
            rayleigh_scatter_db_per_km: 0.25,
            recapture_same: 1e-3,
            recapture_cross: 5e-4,
            fresnel_reflectance: 0.0,
            mux_insertion_loss_db: vec![13.0, 13.0, 14.0],
            bidir_split_loss_db: 3.0,
            demux_insertion_loss_db: vec![9.0, 9.0, 9.0],
            drift_rad_per_s: 1.0,
            reciprocal: false,
            inline_xt: InlineXt::default(),
        }
    }

    /// Lossless, crosstalk-free, DMD-free profile that keeps the inter-group DGD.
    pub fn transparent(cores: usize, mode_groups: &[u8], length_km: f64) -> Self {
        let n = mode_groups.len();
        Self {
            length_km,
            cores,
            mode_groups: mode_groups.to_vec(),
            atten_db_per_km: vec![vec![0.0; n]; cores],
            dgd_ns_per_km: vec![5.0; n.saturating_sub(1)],
            intra_dmd_ps_per_km: vec![0.0; n],
            xt_intermg_db: None,
            xt_intermg_decay_db: 10.0,
            xt_intercore_db: None,
            rayleigh_scatter_db_per_km: 0.0,
            recapture_same: 1e-3,
            recapture_cross: 5e-4,
            fresnel_reflectance: 0.0,
            mux_insertion_loss_db: vec![0.0; n],
            bidir_split_loss_db: 0.0,
            demux_insertion_loss_db: vec![0.0; n],
            drift_rad_per_s: 0.0,
            reciprocal: false,
            inline_xt: InlineXt::default(),
        }
    }

    /// Keeps only the listed cores (0-based), renumbered in the given order.
    /// The inter-core aggregate is kept, so a two-core profile models one
    /// neighbour that stands in for all six.
    pub fn restricted_to(&self, cores: &[usize]) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidConfig("no cores selected".into()));
        }
        let mut out = self.clone();
        out.atten_db_per_km = Vec::with_capacity(cores.len());
        for &c in cores {
            let row = self
                .atten_db_per_km
                .get(c)
                .ok_or_else(|| Error::InvalidConfig(format!("core index {c} out of range")))?;
            out.atten_db_per_km.push(row.clone());
        }
        out.cores = cores.len();
        out.validate()?;
        Ok(out)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn mg_index(&self, mode_group: u8) -> Option<usize> {
        self.mode_groups.iter().position(|&m| m == mode_group)
    }

    /// Fiber loss of one group over the full length, dB.
    pub fn fiber_loss_db(&self, core_idx: usize, mg_idx: usize) -> f64 {
        self.atten_db_per_km[core_idx][mg_idx] * self.length_km
    }

    /// Bulk delay of a group relative to the first group, seconds.
    pub fn group_delay_s(&self, mg_idx: usize) -> f64 {
        self.dgd_ns_per_km[..mg_idx].iter().sum::<f64>() * self.length_km * 1e-9
    }

    pub fn mean_attenuation_db_per_km(&self) -> f64 {
        let all: Vec<f64> = self.atten_db_per_km.iter().flatten().copied().collect();
        all.iter().sum::<f64>() / all.len() as f64
    }

    /// Linear power coupling between two groups of the same core, before the
    /// through-path correction. Adjacent groups share the worst-case aggregate.
    pub fn intermg_pair_level(&self, from_idx: usize, to_idx: usize) -> f64 {
        let Some(agg_db) = self.xt_intermg_db else {
            return 0.0;
        };
        if from_idx == to_idx {
            return 0.0;
        }
        let shape = |d: usize| 10f64.powf(-self.xt_intermg_decay_db * (d as f64 - 1.0) / 10.0);
        let n = self.mode_groups.len();
        let worst = (0..n)
            .map(|i| (0..n).filter(|&j| j != i).map(|j| shape(i.abs_diff(j))).sum::<f64>())
            .fold(0.0, f64::max);
        10f64.powf(agg_db / 10.0) / worst * shape(from_idx.abs_diff(to_idx))
    }

    /// Linear coupling from one other core into a group.
    pub fn intercore_pair_level(&self) -> f64 {
        match self.xt_intercore_db {
            Some(db) if self.cores > 1 => 10f64.powf(db / 10.0) / (self.cores - 1) as f64,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let n = self.mode_groups.len();
        if !(self.length_km > 0.0 && self.length_km.is_finite()) {
            return bad(format!("length_km must be positive, got {}", self.length_km));
        }
        if self.cores == 0 || self.cores > 7 {
            return bad(format!("cores must be in 1..=7, got {}", self.cores));
        }
        if n == 0 {
            return bad("mode_groups is empty".into());
        }
        if let Some(m) = self.mode_groups.iter().find(|&&m| m < 2) {
            return bad(format!("mode group {m} is not usable as a channel"));
        }
        if self.mode_groups.windows(2).any(|w| w[0] >= w[1]) {
            return bad("mode_groups must be strictly increasing".into());
        }
        if self.atten_db_per_km.len() != self.cores
            || self.atten_db_per_km.iter().any(|r| r.len() != n)
        {
            return bad("atten_db_per_km must be [cores][mode_groups]".into());
        }
        if self
            .atten_db_per_km
            .iter()
            .flatten()
            .any(|a| !(*a >= 0.0 && a.is_finite()))
        {
            return bad("attenuation must be finite and >= 0".into());
        }
        if self.dgd_ns_per_km.len() != n - 1 {
            return bad("dgd_ns_per_km needs one entry per adjacent pair".into());
        }
        if self.dgd_ns_per_km.iter().any(|d| !d.is_finite()) {
            return bad("dgd_ns_per_km must be finite".into());
        }
        for (name, v) in [
            ("intra_dmd_ps_per_km", &self.intra_dmd_ps_per_km),
            ("mux_insertion_loss_db", &self.mux_insertion_loss_db),
            ("demux_insertion_loss_db", &self.demux_insertion_loss_db),
        ] {
            if v.len() != n || v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return bad(format!("{name} needs {n} finite non-negative entries"));
            }
        }
        for (name, v) in [
            ("xt_intermg_db", self.xt_intermg_db),
            ("xt_intercore_db", self.xt_intercore_db),
        ] {
            if let Some(x) = v {
                if !(x < 0.0 && x.is_finite()) {
                    return bad(format!("{name} must be negative dB, got {x}"));
                }
            }
        }
        if !(self.xt_intermg_decay_db >= 0.0) {
            return bad("xt_intermg_decay_db must be >= 0".into());
        }
        if !(self.rayleigh_scatter_db_per_km >= 0.0) {
            return bad("rayleigh_scatter_db_per_km must be >= 0".into());
        }
        for (name, r) in [
            ("recapture_same", self.recapture_same),
            ("recapture_cross", self.recapture_cross),
        ] {
            if !(r > 0.0 && r < 1.0) {
                return bad(format!("{name} must be in (0, 1), got {r}"));
            }
        }
        if !(0.0..1.0).contains(&self.fresnel_reflectance) {
            return bad("fresnel_reflectance must be in [0, 1)".into());
        }
        if !(self.bidir_split_loss_db >= 0.0) {
            return bad("bidir_split_loss_db must be >= 0".into());
        }
        if !(self.drift_rad_per_s >= 0.0 && self.drift_rad_per_s.is_finite()) {
            return bad("drift_rad_per_s must be finite and >= 0".into());
        }
        if self.inline_xt.enabled
            && (self.inline_xt.sections == 0 || !(self.inline_xt.db_per_km < 0.0))
        {
            return bad("inline_xt needs sections >= 1 and negative db_per_km".into());
        }
        Ok(())
    }
}
