//! Channel characterisation by launching probes through `propagate`.

use num_complex::Complex64;

use super::channel::{FiberChannel, ModeSignals, PropagateOptions};
use crate::error::{Error, Result};
use crate::signal::{ComplexEnvelope, Direction, ModeId};
use crate::spectral;

/// Received power ratios between groups, dB. `db[from][to]` is the power
/// arriving in group `to` when all four modes of `from` are probed in turn,
/// relative to what stays in `from`. Entries without coupling are -inf.
#[derive(Debug, Clone, PartialEq)]
pub struct XtMatrix {
    /// (1-based core, |l|) per index.
    pub groups: Vec<(u8, u8)>,
    pub db: Vec<Vec<f64>>,
}

fn sum_db(vals: impl Iterator<Item = f64>) -> f64 {
    10.0 * vals.map(|d| 10f64.powf(d / 10.0)).sum::<f64>().log10()
}

impl XtMatrix {
    fn index(&self, core: u8, mg: u8) -> Option<usize> {
        self.groups.iter().position(|&g| g == (core, mg))
    }

    /// Power leaked from a group into the other groups of its own core.
    pub fn intermg_aggregate_db(&self, core: u8, mg: u8) -> Option<f64> {
        let h = self.index(core, mg)?;
        Some(sum_db(
            self.groups
                .iter()
                .enumerate()
                .filter(|(g, k)| *g != h && k.0 == core)
                .map(|(g, _)| self.db[h][g]),
        ))
    }

    /// Power leaked from a group into the same group of the other cores.
    pub fn intercore_aggregate_db(&self, core: u8, mg: u8) -> Option<f64> {
        let h = self.index(core, mg)?;
        Some(sum_db(
            self.groups
                .iter()
                .enumerate()
                .filter(|(_, k)| k.0 != core && k.1 == mg)
                .map(|(g, _)| self.db[h][g]),
        ))
    }

    pub fn worst_intermg_db(&self) -> f64 {
        self.groups
            .iter()
            .filter_map(|&(c, m)| self.intermg_aggregate_db(c, m))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn worst_intercore_db(&self) -> f64 {
        self.groups
            .iter()
            .filter_map(|&(c, m)| self.intercore_aggregate_db(c, m))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn dark_inputs(ch: &FiberChannel, dir: Direction, len: usize, fs: f64) -> ModeSignals {
    let mut m = ModeSignals::new();
    for gi in 0..ch.n_groups() {
        let (c, l) = ch.group_key(gi);
        for id in ModeId::group(c, l, dir) {
            m.insert(id, ComplexEnvelope::zeros(len, fs));
        }
    }
    m
}

fn group_power(out: &ModeSignals, core: u8, mg: u8, dir: Direction) -> f64 {
    ModeId::group(core, mg, dir)
        .iter()
        .map(|id| out[id].mean_power())
        .sum()
}

/// Launches a unit CW probe into each mode of each group and integrates the
/// power received per group.
pub fn measure_crosstalk(ch: &FiberChannel, dir: Direction) -> Result<XtMatrix> {
    const LEN: usize = 64;
    let fs = 24e9;
    let n = ch.n_groups();
    let groups: Vec<(u8, u8)> = (0..n).map(|g| ch.group_key(g)).collect();
    let mut power = vec![vec![0.0; n]; n];
    let opts = PropagateOptions { circular: true };
    for (h, &(hc, hl)) in groups.iter().enumerate() {
        for id in ModeId::group(hc, hl, dir) {
            let mut inp = dark_inputs(ch, dir, LEN, fs);
            inp.insert(id, ComplexEnvelope::new(vec![Complex64::new(1.0, 0.0); LEN], fs));
            let out = ch.propagate_with(&inp, dir, opts)?;
            for (g, &(gc, gl)) in groups.iter().enumerate() {
                power[h][g] += group_power(&out, gc, gl, dir);
            }
        }
    }
    let db = (0..n)
        .map(|h| {
            (0..n)
                .map(|g| {
                    if g == h {
                        0.0
                    } else if power[h][g] == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        10.0 * (power[h][g] / power[h][h]).log10()
                    }
                })
                .collect()
        })
        .collect();
    Ok(XtMatrix { groups, db })
}

/// Incoherent power impulse response of one core.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub sample_period_s: f64,
    /// Received power summed over every port of the core, per sample,
    /// with time zero at the launch instant.
    pub power: Vec<f64>,
    /// Power-weighted centroids of the distinct arrivals, seconds.
    pub peaks_s: Vec<f64>,
}

/// Launches a Gaussian pulse (rms width 2 samples) into each mode of the
/// probe groups separately and sums received power across the core's ports.
pub fn impulse_response(
    ch: &FiberChannel,
    core: u8,
    probe_mgs: &[u8],
    dir: Direction,
    sample_rate_hz: f64,
) -> Result<ImpulseResponse> {
    if probe_mgs.is_empty() {
        return Err(Error::InvalidConfig("no probe groups".into()));
    }
    let p = &ch.profile;
    for &m in probe_mgs {
        if ch.group_index(core, m).is_none() {
            return Err(Error::InvalidConfig(format!("core {core} group {m} not in profile")));
        }
    }
    let t0 = 64usize;
    let max_delay = p.group_delay_s(p.mode_groups.len() - 1) * sample_rate_hz;
    let len = spectral::fast_len(t0 + max_delay.ceil() as usize + 256);
    let sigma = 2.0;
    let pulse: Vec<Complex64> = (0..len)
        .map(|t| {
            let x = (t as f64 - t0 as f64) / sigma;
            Complex64::new((-0.5 * x * x).exp(), 0.0)
        })
        .collect();

    let mut power = vec![0.0; len];
    for &m in probe_mgs {
        for id in ModeId::group(core, m, dir) {
            let mut inp = ModeSignals::new();
            for &l in &p.mode_groups {
                for other in ModeId::group(core, l, dir) {
                    inp.insert(other, ComplexEnvelope::zeros(len, sample_rate_hz));
                }
            }
            inp.insert(id, ComplexEnvelope::new(pulse.clone(), sample_rate_hz));
            let out = ch.propagate(&inp, dir)?;
            for env in out.values() {
                power.iter_mut().zip(&env.samples).for_each(|(a, s)| *a += s.norm_sqr());
            }
        }
    }

    let ts = 1.0 / sample_rate_hz;
    let peak = power.iter().cloned().fold(0.0, f64::max);
    let floor = peak * 1e-2;
    let mut peaks_s = Vec::new();
    let mut t = 0;
    while t < len {
        if power[t] > floor {
            let (mut w, mut wt) = (0.0, 0.0);
            while t < len && power[t] > floor {
                w += power[t];
                wt += power[t] * t as f64;
                t += 1;
            }
            peaks_s.push((wt / w - t0 as f64) * ts);
        } else {
            t += 1;
        }
    }
    Ok(ImpulseResponse {
        sample_period_s: ts,
        power: power.split_off(t0),
        peaks_s,
    })
}
