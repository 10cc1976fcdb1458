//! Rayleigh backscattering and far-facet Fresnel reflection of the
//! counter-propagating signal, seen by a forward coherent receiver.
//!
//! The scattered power recaptured into a forward mode is the distributed
//! integral of the backward power, which has a closed form. After balanced
//! coherent detection the LO power cancels from the signal-to-RB ratio.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiberchan::FiberProfile;
use crate::rng::complex_gaussian;
use crate::signal::{ComplexEnvelope, Direction, ModeId};

/// dB/km to 1/km for power.
pub fn db_to_neper_power(alpha_db_per_km: f64) -> f64 {
    alpha_db_per_km * std::f64::consts::LN_10 / 10.0
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

/// Normal-incidence reflectance ((n - 1) / (n + 1))^2 of a glass-air facet.
pub fn fresnel_reflectance(n: f64) -> f64 {
    ((n - 1.0) / (n + 1.0)).powi(2)
}

/// P_B * a_s * B * (1 - exp(-2 a L)) / (2 a), attenuation in dB/km.
/// Falls back to the a -> 0 limit P_B * a_s * B * L.
pub fn rb_power_closed_form(
    p_backward_w: f64,
    alpha_db_per_km: f64,
    alpha_scatter_db_per_km: f64,
    recapture: f64,
    length_km: f64,
) -> f64 {
    let a = db_to_neper_power(alpha_db_per_km);
    let a_s = db_to_neper_power(alpha_scatter_db_per_km);
    let eff_len = if a * length_km < 1e-8 {
        // Second-order series keeps the small-a branch continuous.
        length_km * (1.0 - a * length_km)
    } else {
        -(-2.0 * a * length_km).exp_m1() / (2.0 * a)
    };
    p_backward_w * a_s * recapture * eff_len
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackwardLaunch {
    pub mode: ModeId,
    pub p_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidirNoiseConfig {
    /// Forward mode whose receiver is evaluated.
    pub forward_mode: ModeId,
    pub p_forward_dbm: f64,
    /// Backward channels; an empty list means no backward traffic.
    pub p_backward_dbm: Vec<BackwardLaunch>,
    pub alpha_db_per_km: f64,
    pub alpha_scatter_db_per_km: f64,
    pub length_km: f64,
    /// Order of the rows and columns of `recapture`.
    pub mode_groups: Vec<u8>,
    /// `recapture[m][n]`: forward group m recapturing light scattered from backward group n.
    pub recapture: Vec<Vec<f64>>,
    pub fresnel_reflectance: f64,
    /// Extra Fresnel suppression by the DEMUX when the groups differ.
    pub demux_mode_suppression_db: f64,
    /// Balanced-detector common-mode rejection; `null` is ideal.
    pub cmrr_db: Option<f64>,
    /// Only used with a finite CMRR, to scale the residual direct beat.
    pub lo_power_dbm: f64,
}

/// One backward channel's share of the noise in the forward receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbContribution {
    pub mode: ModeId,
    pub rb_w: f64,
    pub fresnel_w: f64,
}

impl RbContribution {
    pub fn total_w(&self) -> f64 {
        self.rb_w + self.fresnel_w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedRatio {
    /// Detected signal power over RB noise power, dB; +inf without backward power.
    pub ratio_db: f64,
    pub signal_w: f64,
    /// Total noise, the exact sum of the contributions (plus any CMRR residual).
    pub noise_w: f64,
    pub contributions: Vec<RbContribution>,
}

impl BidirNoiseConfig {
    /// Noise configuration for one forward mode of a fiber profile, with the
    /// forward group's attenuation and the profile's recapture factors.
    pub fn from_profile(
        profile: &FiberProfile,
        forward_mode: ModeId,
        p_forward_dbm: f64,
        backward: Vec<BackwardLaunch>,
    ) -> Result<Self> {
        let core = forward_mode.core as usize;
        let mg = profile
            .mg_index(forward_mode.mode_group())
            .ok_or_else(|| Error::InvalidConfig(format!("{forward_mode} not in profile")))?;
        if core == 0 || core > profile.cores {
            return Err(Error::InvalidConfig(format!("{forward_mode} core out of range")));
        }
        let n = profile.mode_groups.len();
        let recapture = (0..n)
            .map(|m| {
                (0..n)
                    .map(|k| if m == k { profile.recapture_same } else { profile.recapture_cross })
                    .collect()
            })
            .collect();
        let cfg = Self {
            forward_mode,
            p_forward_dbm,
            p_backward_dbm: backward,
            alpha_db_per_km: profile.atten_db_per_km[core - 1][mg],
            alpha_scatter_db_per_km: profile.rayleigh_scatter_db_per_km,
            length_km: profile.length_km,
            mode_groups: profile.mode_groups.clone(),
            recapture,
            fresnel_reflectance: profile.fresnel_reflectance,
            demux_mode_suppression_db: 12.0,
            cmrr_db: None,
            lo_power_dbm: 13.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.forward_mode.direction != Direction::Forward {
            return bad("forward_mode must travel forward".into());
        }
        if self.p_backward_dbm.iter().any(|b| b.mode.direction != Direction::Backward) {
            return bad("backward launches must travel backward".into());
        }
        let finite = [self.p_forward_dbm, self.alpha_db_per_km, self.alpha_scatter_db_per_km, self.length_km];
        if finite.iter().any(|v| !v.is_finite())
            || self.p_backward_dbm.iter().any(|b| !b.p_dbm.is_finite())
        {
            return bad("powers and fiber parameters must be finite".into());
        }
        if self.alpha_db_per_km < 0.0 || self.alpha_scatter_db_per_km < 0.0 || self.length_km < 0.0 {
            return bad("attenuation and length must be >= 0".into());
        }
        if self.alpha_scatter_db_per_km > self.alpha_db_per_km {
            return bad("scatter loss cannot exceed total attenuation".into());
        }
        let n = self.mode_groups.len();
        if self.recapture.len() != n || self.recapture.iter().any(|r| r.len() != n) {
            return bad("recapture must be square over mode_groups".into());
        }
        for (m, row) in self.recapture.iter().enumerate() {
            for (k, b) in row.iter().enumerate() {
                if !(*b > 0.0 && *b < 1.0) {
                    return bad(format!("recapture[{m}][{k}] = {b} outside (0, 1)"));
                }
                if *b > row[m] {
                    return bad(format!("recapture[{m}][{k}] exceeds the same-group factor"));
                }
            }
        }
        if self.mg(self.forward_mode.mode_group()).is_none() {
            return bad(format!("{} not in mode_groups", self.forward_mode));
        }
        if let Some(b) = self.p_backward_dbm.iter().find(|b| self.mg(b.mode.mode_group()).is_none()) {
            return bad(format!("{} not in mode_groups", b.mode));
        }
        if !(0.0..1.0).contains(&self.fresnel_reflectance) {
            return bad("fresnel_reflectance must be in [0, 1)".into());
        }
        if self.demux_mode_suppression_db < 0.0 {
            return bad("demux_mode_suppression_db must be >= 0".into());
        }
        Ok(())
    }

    fn mg(&self, l: u8) -> Option<usize> {
        self.mode_groups.iter().position(|&m| m == l)
    }

    /// Recaptured backscatter in the forward mode from one backward mode.
    pub fn rb_power(&self, p_backward_w: f64, backward_mode: ModeId) -> Result<f64> {
        let m = self.mg(self.forward_mode.mode_group()).expect("validated");
        let n = self
            .mg(backward_mode.mode_group())
            .ok_or_else(|| Error::InvalidConfig(format!("{backward_mode} not in mode_groups")))?;
        if backward_mode.core != self.forward_mode.core {
            return Ok(0.0);
        }
        Ok(rb_power_closed_form(
            p_backward_w,
            self.alpha_db_per_km,
            self.alpha_scatter_db_per_km,
            self.recapture[m][n],
            self.length_km,
        ))
    }

    /// Backward power reflected once at the far facet and returned over 2L.
    pub fn fresnel_power(&self, p_backward_w: f64, same_mode: bool) -> f64 {
        let a = db_to_neper_power(self.alpha_db_per_km);
        let p = p_backward_w * self.fresnel_reflectance * (-2.0 * a * self.length_km).exp();
        if same_mode {
            p
        } else {
            p * 10f64.powf(-self.demux_mode_suppression_db / 10.0)
        }
    }

    pub fn detected_ratio(&self) -> Result<DetectedRatio> {
        self.validate()?;
        let a = db_to_neper_power(self.alpha_db_per_km);
        let signal_w = dbm_to_w(self.p_forward_dbm) * (-a * self.length_km).exp();
        let mut contributions = Vec::with_capacity(self.p_backward_dbm.len());
        for b in &self.p_backward_dbm {
            let pb = dbm_to_w(b.p_dbm);
            let same_core = b.mode.core == self.forward_mode.core;
            let same_mode = b.mode.mode_group() == self.forward_mode.mode_group();
            contributions.push(RbContribution {
                mode: b.mode,
                rb_w: self.rb_power(pb, b.mode)?,
                fresnel_w: if same_core { self.fresnel_power(pb, same_mode) } else { 0.0 },
            });
        }
        let rb_total: f64 = contributions.iter().map(RbContribution::total_w).sum();
        let residual = match self.cmrr_db {
            Some(c) => rb_total * signal_w / dbm_to_w(self.lo_power_dbm) * 10f64.powf(-c / 10.0),
            None => 0.0,
        };
        let noise_w = rb_total + residual;
        let ratio_db = if noise_w > 0.0 {
            10.0 * (signal_w / noise_w).log10()
        } else {
            f64::INFINITY
        };
        Ok(DetectedRatio {
            ratio_db,
            signal_w,
            noise_w,
            contributions,
        })
    }
}

/// Gaussian stand-in for the recaptured backscatter field: circular complex
/// noise of mean power `p_rb_w`, shaped like `template`.
pub fn rb_as_noise_field<R: Rng + ?Sized>(
    p_rb_w: f64,
    template: &ComplexEnvelope,
    rng: &mut R,
) -> Result<ComplexEnvelope> {
    if !(p_rb_w >= 0.0 && p_rb_w.is_finite()) {
        return Err(Error::InvalidConfig(format!("RB power {p_rb_w} must be finite and >= 0")));
    }
    let samples = if p_rb_w == 0.0 {
        vec![num_complex::Complex64::new(0.0, 0.0); template.len()]
    } else {
        complex_gaussian(rng, template.len(), p_rb_w)
    };
    Ok(ComplexEnvelope {
        samples,
        sample_rate_hz: template.sample_rate_hz,
        delay_samples: 0.0,
    })
}
