//! Fractionally spaced M x M MIMO equalizer: CMA acquisition, then
//! radius-directed refinement on the two rings of the star constellation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::txgen::QamSymbolMap;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Counts the complex multiplications of the filtering path (not adaptation).
pub trait MulCounter {
    fn add(&mut self, n: u64);
}

/// The counter used in production: compiles to nothing.
pub struct NoCount;

impl MulCounter for NoCount {
    #[inline(always)]
    fn add(&mut self, _: u64) {}
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CountingMul {
    pub muls: u64,
}

impl MulCounter for CountingMul {
    #[inline(always)]
    fn add(&mut self, n: u64) {
        self.muls += n;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Cma,
    Rde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct EqualizerConfig {
    /// Odd, at most 15.
    pub n_taps: usize,
    pub step_size: f64,
    pub window_symbols: usize,
    /// Normalized excess dispersion below which CMA hands over to RDE.
    /// 0 is the alphabet's own CMA cost, 1 that of a Gaussian mixture.
    pub switch_threshold: f64,
    /// Drop in normalized dispersion between consecutive blocks of
    /// `plateau_windows` windows still counted as flat, on top of two
    /// standard errors of the block means.
    pub plateau_tolerance: f64,
    /// Block length, in windows, of the plateau test that also ends CMA.
    pub plateau_windows: usize,
    /// A plateau only ends CMA once the last block's mean is below this.
    /// An equal mixture of two sources scores 0.5.
    pub plateau_ceiling: f64,
    /// Output cross-correlation treated as a duplicate source.
    pub guard_correlation: f64,
    /// Weight of the cross-output decorrelation term during CMA; 0 disables.
    pub decorrelation_gain: f64,
    /// Forgetting factor of the running cross-correlation estimates.
    pub decorrelation_memory: f64,
    /// Symbols of a first adaptation pass before the recorded pass.
    pub preconverge_symbols: usize,
    pub divergence_energy: f64,
    /// Record a copy of the taps every this many symbols; 0 disables.
    pub snapshot_symbols: usize,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            n_taps: 15,
            step_size: 1e-3,
            window_symbols: 2048,
            switch_threshold: 0.2,
            plateau_tolerance: 0.02,
            plateau_windows: 4,
            plateau_ceiling: 0.5,
            guard_correlation: 0.9,
            decorrelation_gain: 0.5,
            decorrelation_memory: 1e-3,
            preconverge_symbols: 50_000,
            divergence_energy: 1e3,
            snapshot_symbols: 0,
        }
    }
}

impl EqualizerConfig {
    pub const MAX_TAPS: usize = 15;

    pub fn validate(&self) -> Result<()> {
        if self.n_taps == 0 || self.n_taps % 2 == 0 || self.n_taps > Self::MAX_TAPS {
            return Err(Error::InvalidConfig(format!(
                "tap count {} must be odd and <= {}",
                self.n_taps,
                Self::MAX_TAPS
            )));
        }
        if !(self.step_size > 0.0) || self.window_symbols < 16 {
            return Err(Error::InvalidConfig("step size > 0 and window >= 16 required".into()));
        }
        Ok(())
    }
}

/// Adaptive state carried between blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimoEqualizerState {
    pub m: usize,
    pub n_taps: usize,
    /// `taps[(out * m + in) * n_taps + k]`
    pub taps: Vec<Complex64>,
    pub step_size: f64,
    /// CMA modulus squared, E|a|^4 / E|a|^2.
    pub r2_cma: f64,
    /// Ring radii for the radius-directed stage.
    pub radii: [f64; 2],
    pub dispersion_floor: f64,
    pub dispersion_gaussian: f64,
    /// E|a|^4 / (E|a|^2)^2 of the alphabet.
    pub kurtosis: f64,
    pub stage: Stage,
    pub symbols_seen: usize,
    pub stage_switch_symbol: Option<usize>,
    pub guard_resets: usize,
    /// Windowed CMA dispersion, one entry per completed window.
    pub dispersion_trace: Vec<f64>,
    /// Worst output's normalized dispersion per window (see
    /// [`EqualizerConfig::switch_threshold`]).
    pub separation_trace: Vec<f64>,
    /// `(symbols_seen, taps)` pairs, see [`EqualizerConfig::snapshot_symbols`].
    #[serde(skip)]
    pub snapshots: Vec<(usize, Vec<Complex64>)>,
    #[serde(skip)]
    acc: WindowAcc,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct WindowAcc {
    disp: f64,
    count: usize,
    /// Completed CMA windows since the last reset.
    cma_windows: usize,
    recent: Vec<Vec<Complex64>>,
    /// `rho[(o * m + q) * lags + l]` estimates E[y_o(n) y_q(n - l + L)^*].
    rho: Vec<Complex64>,
    /// Last `lags` outputs per port, newest first.
    hist: Vec<Complex64>,
}

impl MimoEqualizerState {
    /// Centre-spike on the diagonal, zeros elsewhere.
    pub fn new(m: usize, cfg: &EqualizerConfig, map: &QamSymbolMap) -> Result<Self> {
        cfg.validate()?;
        if m == 0 {
            return Err(Error::InvalidConfig("MIMO size must be >= 1".into()));
        }
        let n = cfg.n_taps;
        let mut taps = vec![ZERO; m * m * n];
        for i in 0..m {
            taps[(i * m + i) * n + n / 2] = Complex64::new(1.0, 0.0);
        }
        Ok(Self {
            m,
            n_taps: n,
            taps,
            step_size: cfg.step_size,
            r2_cma: map.cma_modulus_sq(),
            radii: map.ring_radii(),
            dispersion_floor: map.cma_dispersion_floor(),
            dispersion_gaussian: map.cma_dispersion_gaussian(),
            kurtosis: map.cma_modulus_sq() / crate::signal::mean_power(&(0..8).map(|l| map.point(l)).collect::<Vec<_>>()),
            stage: Stage::Cma,
            symbols_seen: 0,
            stage_switch_symbol: None,
            guard_resets: 0,
            dispersion_trace: Vec::new(),
            separation_trace: Vec::new(),
            snapshots: Vec::new(),
            acc: WindowAcc::default(),
        })
    }

    pub fn tap(&self, out: usize, inp: usize, k: usize) -> Complex64 {
        self.taps[(out * self.m + inp) * self.n_taps + k]
    }

    pub fn output_energy(&self, out: usize) -> f64 {
        let len = self.m * self.n_taps;
        self.taps[out * len..(out + 1) * len].iter().map(|t| t.norm_sqr()).sum()
    }

    /// Sum of taps per (out, in): the equalizer response at DC.
    pub fn dc_response(&self) -> Vec<Vec<Complex64>> {
        (0..self.m)
            .map(|o| (0..self.m).map(|p| (0..self.n_taps).map(|k| self.tap(o, p, k)).sum()).collect())
            .collect()
    }

    /// Taps as `[out][in][k] = [re, im]`.
    pub fn taps_nested(&self) -> Vec<Vec<Vec<[f64; 2]>>> {
        (0..self.m)
            .map(|o| {
                (0..self.m)
                    .map(|p| (0..self.n_taps).map(|k| { let t = self.tap(o, p, k); [t.re, t.im] }).collect())
                    .collect()
            })
            .collect()
    }

    pub fn taps_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.taps_nested())?)
    }

    /// Scale-free CMA dispersion of one output: its kurtosis E|y|^4/(E|y|^2)^2
    /// mapped so the alphabet scores 0 and a Gaussian mixture 1. Equivalently
    /// one minus the output's fourth cumulant relative to a clean symbol's.
    fn normalized_dispersion(&self, y: &[Complex64]) -> f64 {
        let n = y.len() as f64;
        let m2 = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        let m4 = y.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() / n;
        (m4 / (m2 * m2) - self.kurtosis) / (2.0 - self.kurtosis)
    }

    fn nearest_radius_sq(&self, p: f64) -> f64 {
        let [a, b] = self.radii;
        let (a2, b2) = (a * a, b * b);
        if (p - a2).abs() <= (p - b2).abs() {
            a2
        } else {
            b2
        }
    }

    /// Replaces a duplicated output with a centre spike whose DC row is
    /// orthogonal to the other outputs' DC rows.
    fn reinit_output(&mut self, dup: usize) {
        let (m, n) = (self.m, self.n_taps);
        let dc = self.dc_response();
        let mut basis: Vec<Vec<Complex64>> = Vec::new();
        for (o, row) in dc.iter().enumerate() {
            if o == dup {
                continue;
            }
            let mut v = row.clone();
            for b in &basis {
                let proj: Complex64 = v.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
            let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if nv > 1e-9 {
                v.iter_mut().for_each(|x| *x /= nv);
                basis.push(v);
            }
        }
        let mut best = (0.0, vec![ZERO; m]);
        for p in 0..m {
            let mut v = vec![ZERO; m];
            v[p] = Complex64::new(1.0, 0.0);
            for b in &basis {
                let proj: Complex64 = v.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
            let nv = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if nv > best.0 {
                best = (nv, v.iter().map(|x| x / nv).collect());
            }
        }
        let scale = {
            let others: Vec<f64> = dc
                .iter()
                .enumerate()
                .filter(|(o, _)| *o != dup)
                .map(|(_, r)| r.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt())
                .collect();
            if others.is_empty() { 1.0 } else { others.iter().sum::<f64>() / others.len() as f64 }
        };
        for p in 0..m {
            for k in 0..n {
                self.taps[(dup * m + p) * n + k] = if k == n / 2 { best.1[p] * scale } else { ZERO };
            }
        }
        self.guard_resets += 1;
    }
}

/// Largest normalized cross-correlation between two outputs over lags
/// within `max_lag` symbols.
fn max_cross_correlation(a: &[Complex64], b: &[Complex64], max_lag: usize) -> f64 {
    let pa: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let pb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    if pa == 0.0 || pb == 0.0 {
        return 0.0;
    }
    let n = a.len().min(b.len());
    let mut best = 0.0f64;
    for lag in -(max_lag as isize)..=(max_lag as isize) {
        let mut s = ZERO;
        for i in 0..n {
            let j = i as isize + lag;
            if j >= 0 && (j as usize) < n {
                s += a[i] * b[j as usize].conj();
            }
        }
        best = best.max(s.norm() / (pa * pb).sqrt());
    }
    best
}

/// Runs the equalizer over 2-sample/symbol inputs (one slice per port),
/// continuing from `state`. Returns one symbol-rate stream per output;
/// output symbol n is centred on input sample 2n.
pub fn mimo_equalize<C: MulCounter>(
    inputs: &[&[Complex64]],
    state: &mut MimoEqualizerState,
    cfg: &EqualizerConfig,
    counter: &mut C,
) -> Result<Vec<Vec<Complex64>>> {
    let m = state.m;
    let n_t = state.n_taps;
    if inputs.len() != m {
        return Err(Error::Shape(format!("{} inputs for a {m}x{m} equalizer", inputs.len())));
    }
    let len = inputs[0].len();
    if inputs.iter().any(|x| x.len() != len) {
        return Err(Error::Shape("equalizer inputs differ in length".into()));
    }
    let c = (n_t / 2) as isize;
    let n_sym = len / 2;
    let mut out = vec![Vec::with_capacity(n_sym); m];
    let mut reg = vec![ZERO; m * n_t];
    let mut y = vec![ZERO; m];
    let mut e = vec![ZERO; m];
    let win = cfg.window_symbols;
    let lag = n_t / 2;
    let lags = 2 * lag + 1;
    if state.acc.rho.len() != m * m * lags {
        state.acc.rho = vec![ZERO; m * m * lags];
        state.acc.hist = vec![ZERO; m * lags];
    }
    let decorrelate = cfg.decorrelation_gain > 0.0 && m > 1;

    for n in 0..n_sym {
        for p in 0..m {
            for k in 0..n_t {
                let idx = 2 * n as isize + k as isize - c;
                reg[p * n_t + k] = if idx >= 0 && (idx as usize) < len { inputs[p][idx as usize] } else { ZERO };
            }
        }
        for o in 0..m {
            let w = &state.taps[o * m * n_t..(o + 1) * m * n_t];
            let mut acc = ZERO;
            for (wi, xi) in w.iter().zip(&reg) {
                acc += wi * xi;
            }
            counter.add((m * n_t) as u64);
            y[o] = acc;
            let p = acc.norm_sqr();
            let target = match state.stage {
                Stage::Cma => state.r2_cma,
                Stage::Rde => state.nearest_radius_sq(p),
            };
            e[o] = acc * (target - p);
            let d = state.r2_cma - p;
            state.acc.disp += d * d;
        }
        if decorrelate {
            decorrelation_step(state, cfg, &y, &mut e, lag);
        }
        for o in 0..m {
            let g = e[o] * state.step_size;
            if g == ZERO {
                continue;
            }
            let w = &mut state.taps[o * m * n_t..(o + 1) * m * n_t];
            for (wi, xi) in w.iter_mut().zip(&reg) {
                *wi += g * xi.conj();
            }
        }
        state.acc.count += 1;
        if state.acc.recent.len() != m {
            state.acc.recent = vec![Vec::with_capacity(win); m];
        }
        for o in 0..m {
            out[o].push(y[o]);
            state.acc.recent[o].push(y[o]);
        }
        state.symbols_seen += 1;
        if cfg.snapshot_symbols > 0 && state.symbols_seen % cfg.snapshot_symbols == 0 {
            state.snapshots.push((state.symbols_seen, state.taps.clone()));
        }

        if state.acc.count == win {
            window_checks(state, cfg, lag)?;
        }
    }
    Ok(out)
}

/// Pushes `y` into the output history, refreshes the lagged cross-correlation
/// estimates and, while CMA is active, adds the gradient of their summed
/// squared magnitude to the error so outputs are driven onto distinct sources.
/// Lags span +-`lag` symbols: the same source can reappear with a delay.
fn decorrelation_step(
    state: &mut MimoEqualizerState,
    cfg: &EqualizerConfig,
    y: &[Complex64],
    e: &mut [Complex64],
    lag: usize,
) {
    let m = state.m;
    let lags = 2 * lag + 1;
    let a = cfg.decorrelation_memory;
    let acc = &mut state.acc;
    // hist[q * lags + k] holds y_q(n - k); after the shift k = 0 is now.
    for q in 0..m {
        let h = &mut acc.hist[q * lags..(q + 1) * lags];
        h.rotate_right(1);
        h[0] = y[q];
    }
    // Future samples of q (negative lags) are stood in for by swapping roles:
    // E[y_o(n) y_q(n + k)^*] = conj(E[y_q(n) y_o(n - k)^*]).
    for o in 0..m {
        for q in 0..m {
            if o == q {
                continue;
            }
            for k in 0..=lag {
                let r = &mut acc.rho[(o * m + q) * lags + lag + k];
                *r += a * (y[o] * acc.hist[q * lags + k].conj() - *r);
            }
        }
    }
    for o in 0..m {
        for q in 0..m {
            if o == q {
                continue;
            }
            for k in 1..=lag {
                acc.rho[(o * m + q) * lags + lag - k] = acc.rho[(q * m + o) * lags + lag + k].conj();
            }
        }
    }
    if state.stage != Stage::Cma {
        return;
    }
    let g = cfg.decorrelation_gain;
    for o in 0..m {
        let mut grad = ZERO;
        for q in 0..m {
            if o == q {
                continue;
            }
            // Only past samples of q are available; the mirrored pairs carry
            // the negative lags through q's own update.
            for k in 0..=lag {
                grad += acc.rho[(o * m + q) * lags + lag + k] * acc.hist[q * lags + k];
            }
        }
        e[o] -= g * grad;
    }
}

/// True when the mean of the last block of windows is no lower than the
/// block before it, within tolerance. `run` counts windows since a reset.
fn plateaued(trace: &[f64], run: usize, cfg: &EqualizerConfig) -> bool {
    let k = cfg.plateau_windows;
    if k == 0 || run < 2 * k {
        return false;
    }
    let stats = |b: &[f64]| {
        let m = b.iter().sum::<f64>() / k as f64;
        let v = if k > 1 { b.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1) as f64 } else { 0.0 };
        (m, v / k as f64)
    };
    let n = trace.len();
    let (new, vn) = stats(&trace[n - k..]);
    let (old, vo) = stats(&trace[n - 2 * k..n - k]);
    new < cfg.plateau_ceiling && old - new < cfg.plateau_tolerance + 2.0 * (vn + vo).sqrt()
}

fn window_checks(state: &mut MimoEqualizerState, cfg: &EqualizerConfig, lag: usize) -> Result<()> {
    let m = state.m;
    let j = state.acc.disp / (state.acc.count * m) as f64;
    state.acc.disp = 0.0;
    state.acc.count = 0;
    let recent = std::mem::take(&mut state.acc.recent);

    for o in 0..m {
        let energy = state.output_energy(o);
        if !(energy < cfg.divergence_energy) {
            return Err(Error::AdaptationFailure {
                output: o,
                symbol: state.symbols_seen,
                tap_energy: energy,
            });
        }
    }
    // Ignore windows where the signal has not arrived yet.
    let active = recent.iter().all(|r| r.iter().any(|v| v.norm_sqr() > 1e-6));
    if !active {
        return Ok(());
    }
    let mut reset = false;
    for a in 0..m {
        for b in a + 1..m {
            if max_cross_correlation(&recent[a], &recent[b], lag) > cfg.guard_correlation {
                state.reinit_output(b);
                reset = true;
            }
        }
    }
    if reset {
        // A fresh output is a mixture again: reacquire with CMA.
        if state.stage == Stage::Rde {
            state.stage = Stage::Cma;
            state.step_size *= 2.0;
            state.stage_switch_symbol = None;
        }
        state.acc.cma_windows = 0;
        state.separation_trace.push(f64::NAN);
        state.dispersion_trace.push(j);
        return Ok(());
    }
    state.dispersion_trace.push(j);
    let excess = recent
        .iter()
        .map(|r| state.normalized_dispersion(r))
        .fold(f64::NEG_INFINITY, f64::max);
    state.separation_trace.push(excess);
    if state.stage == Stage::Cma {
        state.acc.cma_windows += 1;
        if excess < cfg.switch_threshold || plateaued(&state.separation_trace, state.acc.cma_windows, cfg) {
            state.stage = Stage::Rde;
            state.step_size *= 0.5;
            state.stage_switch_symbol = Some(state.symbols_seen);
        }
    }
    Ok(())
}
