//! Blind phase search with a decision-directed refinement.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::txgen::QamSymbolMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct CpeConfig {
    pub test_phases: usize,
    /// Symbols in the sliding average.
    pub window: usize,
}

impl Default for CpeConfig {
    fn default() -> Self {
        Self {
            test_phases: 32,
            window: 64,
        }
    }
}

fn window_sums<T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>>(v: &[T], half: usize, zero: T) -> Vec<T> {
    let n = v.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(zero);
    for x in v {
        let last = *prefix.last().unwrap();
        prefix.push(last + *x);
    }
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1) + 1;
            prefix[hi] - prefix[lo]
        })
        .collect()
}

fn unwrap_quarter(phases: &mut [f64]) {
    for k in 1..phases.len() {
        let d = phases[k] - phases[k - 1];
        phases[k] -= FRAC_PI_2 * (d / FRAC_PI_2).round();
    }
}

/// Removes carrier phase, leaving a possible k x 90 degree ambiguity.
/// Returns the corrected symbols and the removed phase per symbol.
pub fn carrier_phase_estimate(
    y: &[Complex64],
    map: &QamSymbolMap,
    cfg: &CpeConfig,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    if cfg.test_phases < 2 || cfg.window < 2 {
        return Err(Error::InvalidConfig("CPE needs >= 2 test phases and window >= 2".into()));
    }
    let n = y.len();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let b = cfg.test_phases;
    let half = cfg.window / 2;
    let test: Vec<Complex64> = (0..b)
        .map(|i| Complex64::from_polar(1.0, -(-FRAC_PI_4 + FRAC_PI_2 * i as f64 / b as f64)))
        .collect();

    // Blind phase search over [-45, 45) degrees.
    let mut best_cost = vec![f64::INFINITY; n];
    let mut best_idx = vec![0usize; n];
    let mut dist = vec![0.0; n];
    for (i, rot) in test.iter().enumerate() {
        for (d, v) in dist.iter_mut().zip(y) {
            let z = v * rot;
            *d = (z - map.point(map.decide(z))).norm_sqr();
        }
        let sums = window_sums(&dist, half, 0.0);
        for k in 0..n {
            if sums[k] < best_cost[k] {
                best_cost[k] = sums[k];
                best_idx[k] = i;
            }
        }
    }
    let mut coarse: Vec<f64> = best_idx
        .iter()
        .map(|&i| -FRAC_PI_4 + FRAC_PI_2 * i as f64 / b as f64)
        .collect();
    unwrap_quarter(&mut coarse);

    // Decision-directed ML refinement around the coarse trajectory.
    let corr: Vec<Complex64> = y
        .iter()
        .zip(&coarse)
        .map(|(v, p)| {
            let z = v * Complex64::from_polar(1.0, -p);
            let a = map.point(map.decide(z));
            v * a.conj()
        })
        .collect();
    let sums = window_sums(&corr, half, Complex64::new(0.0, 0.0));
    let mut phase: Vec<f64> = sums
        .iter()
        .zip(&coarse)
        .map(|(s, p)| {
            let mut d = s.arg() - p;
            d -= std::f64::consts::TAU * (d / std::f64::consts::TAU).round();
            if d.abs() < FRAC_PI_4 { p + d } else { *p }
        })
        .collect();
    unwrap_quarter(&mut phase);
    let out = y
        .iter()
        .zip(&phase)
        .map(|(v, p)| v * Complex64::from_polar(1.0, -p))
        .collect();
    Ok((out, phase))
}
