//! Shared simulation steps: transmitters, channel, noise, receiver and
//! per-channel measurement. Every random draw comes from a stream labelled
//! by what it is for and which channel it belongs to, so results do not
//! depend on scheduling.

use std::collections::BTreeMap;

use sdmlink::fiberchan::{add_optical_noise, build_channel, FiberChannel, FiberProfile, ModeSignals, OSNR_REF_BANDWIDTH_HZ};
use sdmlink::metrics::{align_group, snr_evm, AlignedBer, LinkRow};
use sdmlink::rbnoise::{rb_as_noise_field, BackwardLaunch, BidirNoiseConfig, DetectedRatio};
use sdmlink::rng::{derive_seed, stream, tag};
use sdmlink::rxdsp::{apply_front_end, receive, DspConfig, DspOutput, FrontEndImpairments};
use sdmlink::txgen::{pulse_shape, transmit_group, PrbsDescriptor, PulseShaper, QamSymbolMap, TxWaveform};
use sdmlink::{Complex64, ComplexEnvelope, Direction, ModeId, MODES_PER_GROUP};

use crate::config::ExperimentConfig;
use crate::error::Result;

/// One 4-mode group: 1-based core of the simulated profile and |l|.
pub type GroupId = (u8, u8);

fn dir_label(d: Direction) -> u64 {
    d.index() as u64
}

/// Seed for one purpose of one group.
pub fn group_seed(seed: u64, what: &str, wl: u32, dir: Direction, g: GroupId, extra: u64) -> u64 {
    derive_seed(seed, &[tag(what), wl as u64, dir_label(dir), g.0 as u64, g.1 as u64, extra])
}

pub fn all_groups(profile: &FiberProfile) -> Vec<GroupId> {
    (1..=profile.cores as u8)
        .flat_map(|c| profile.mode_groups.iter().map(move |&l| (c, l)))
        .collect()
}

pub struct Simulator<'a> {
    pub cfg: &'a ExperimentConfig,
    pub profile: FiberProfile,
    pub map: QamSymbolMap,
    pub shaper: PulseShaper,
}

/// Fields at the receiver of one group, before the front end.
#[derive(Debug, Clone)]
pub struct ReceivedGroup {
    pub group: GroupId,
    pub direction: Direction,
    pub wavelength: u32,
    pub refs: Vec<PrbsDescriptor>,
    /// Signal plus crosstalk, noise free.
    pub clean: Vec<ComplexEnvelope>,
}

/// Result of one group through the receiver.
#[derive(Debug, Clone)]
pub struct GroupOutcome {
    pub rows: Vec<LinkRow>,
    pub output: Option<DspOutput>,
    /// Per transmitted mode: the aligned measurement, if it locked.
    pub aligned: Vec<Option<(usize, AlignedBer)>>,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let profile = cfg.simulated_profile()?;
        let shaper = PulseShaper::new(cfg.dsp.roll_off, 2, cfg.dsp.span_symbols, cfg.dsp.symbol_rate_hz)?;
        Ok(Self {
            cfg,
            profile,
            map: QamSymbolMap::star_8qam(),
            shaper,
        })
    }

    pub fn with_profile(cfg: &'a ExperimentConfig, profile: FiberProfile) -> Result<Self> {
        let mut s = Self::new(cfg)?;
        profile.validate()?;
        s.profile = profile;
        Ok(s)
    }

    pub fn channel(&self, wl: u32) -> Result<FiberChannel> {
        Ok(build_channel(&self.profile, derive_seed(self.cfg.seed, &[tag("channel"), wl as u64]))?)
    }

    /// 1-based core id in the full profile.
    pub fn physical_core(&self, core: u8) -> u8 {
        self.cfg.cores.get(core as usize - 1).map_or(core, |&c| c as u8 + 1)
    }

    pub fn transmit(&self, wl: u32, dir: Direction, g: GroupId) -> Result<Vec<TxWaveform>> {
        Ok(transmit_group(
            MODES_PER_GROUP,
            self.cfg.symbols,
            group_seed(self.cfg.seed, "tx", wl, dir, g, 0),
            &self.map,
            &self.shaper,
            self.cfg.link.tail_pad_samples,
        )?)
    }

    /// Launches `groups` in direction `dir` and returns what reaches each
    /// group's receiver. Crosstalk only comes from launched groups.
    pub fn propagate(&self, channel: &FiberChannel, wl: u32, dir: Direction, groups: &[GroupId]) -> Result<Vec<ReceivedGroup>> {
        let mut inputs = ModeSignals::new();
        let mut refs = BTreeMap::new();
        for &g in groups {
            let tx = self.transmit(wl, dir, g)?;
            refs.insert(g, tx.iter().map(|w| w.prbs).collect::<Vec<_>>());
            for (id, w) in ModeId::group(g.0, g.1, dir).iter().zip(tx) {
                inputs.insert(*id, w.envelope);
            }
        }
        let out = if self.cfg.link.drift && self.profile.drift_rad_per_s > 0.0 {
            let mut ch = channel.clone();
            let mut rng = stream(self.cfg.seed, &[tag("drift"), wl as u64, dir_label(dir)]);
            ch.propagate_drifting(&inputs, dir, 2 * self.cfg.link.drift_block_symbols, &mut rng)?
        } else {
            channel.propagate(&inputs, dir)?
        };
        Ok(groups
            .iter()
            .map(|&g| ReceivedGroup {
                group: g,
                direction: dir,
                wavelength: wl,
                refs: refs[&g].clone(),
                clean: ModeId::group(g.0, g.1, dir).iter().map(|id| out[id].clone()).collect(),
            })
            .collect())
    }

    /// Mean power of the frame itself, excluding the zero padding.
    pub fn frame_power(&self, x: &ComplexEnvelope) -> f64 {
        x.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / (2 * self.cfg.symbols) as f64
    }

    /// ASE at the configured OSNR, referred to the frame power.
    pub fn add_ase(&self, x: &ComplexEnvelope, osnr_db: Option<f64>, seed: u64) -> ComplexEnvelope {
        let Some(osnr) = osnr_db else {
            return x.clone();
        };
        let p_frame = self.frame_power(x);
        let p_all = x.mean_power();
        if p_frame == 0.0 {
            return x.clone();
        }
        // The core routine references the whole buffer's mean power.
        let adjusted = osnr + 10.0 * (p_all / p_frame).log10();
        let mut rng = stream(seed, &[]);
        add_optical_noise(x, adjusted, OSNR_REF_BANDWIDTH_HZ, &mut rng)
    }

    /// Unit-power backscatter field with the signal's spectrum: Gaussian
    /// symbols through the transmit shaper.
    pub fn rb_unit_field(&self, len: usize, seed: u64) -> Result<ComplexEnvelope> {
        let n_sym = len.div_ceil(2) + 1;
        let template = ComplexEnvelope::zeros(n_sym, self.cfg.dsp.symbol_rate_hz);
        let mut rng = stream(seed, &[]);
        let white = rb_as_noise_field(1.0, &template, &mut rng)?;
        let mut shaped = pulse_shape(&white.samples, &self.shaper)?;
        shaped.samples.resize(len, Complex64::new(0.0, 0.0));
        let p = shaped.mean_power();
        let g = if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 };
        Ok(ComplexEnvelope::new(shaped.samples.iter().map(|v| v * g).collect(), 2.0 * self.cfg.dsp.symbol_rate_hz))
    }

    /// Detected signal-to-backscatter ratio for a receiving mode of either
    /// direction. The model is written for a forward receiver, so a backward
    /// receiver is evaluated with the roles of the directions swapped.
    pub fn rb_ratio(&self, mode: ModeId, launches: Vec<BackwardLaunch>, fresnel: f64) -> Result<DetectedRatio> {
        let flip = mode.direction == Direction::Backward;
        let as_forward = |m: ModeId| ModeId {
            direction: if flip { opposite(m.direction) } else { m.direction },
            ..m
        };
        let launches = launches
            .into_iter()
            .map(|b| BackwardLaunch { mode: as_forward(b.mode), ..b })
            .collect();
        let mut profile = self.profile.clone();
        profile.fresnel_reflectance = fresnel;
        let mut cfg = BidirNoiseConfig::from_profile(&profile, as_forward(mode), self.cfg.noise.p_forward_dbm, launches)?;
        cfg.demux_mode_suppression_db = self.cfg.noise.demux_mode_suppression_db;
        cfg.cmrr_db = self.cfg.noise.cmrr_db;
        cfg.lo_power_dbm = self.cfg.noise.lo_power_dbm;
        Ok(cfg.detected_ratio()?)
    }

    /// Every counter-propagating mode of the simulated groups in `core`,
    /// at the configured backward power.
    pub fn full_backward_load(&self, core: u8, dir: Direction) -> Vec<BackwardLaunch> {
        self.profile
            .mode_groups
            .iter()
            .flat_map(|&l| ModeId::group(core, l, opposite(dir)))
            .map(|mode| BackwardLaunch {
                mode,
                p_dbm: self.cfg.noise.p_backward_dbm,
            })
            .collect()
    }

    /// Clean fields plus backscatter, ASE and the front end. Entry `i` of
    /// `rb_noise_over_signal` is mode i's backscatter power over its frame power.
    pub fn impair(&self, rg: &ReceivedGroup, rb_noise_over_signal: &[f64], osnr_db: Option<f64>, front_end: &FrontEndImpairments) -> Result<Vec<ComplexEnvelope>> {
        let (wl, dir, g) = (rg.wavelength, rg.direction, rg.group);
        let mut fields = Vec::with_capacity(MODES_PER_GROUP);
        for (i, x) in rg.clean.iter().enumerate() {
            let mut y = x.clone();
            let ratio = rb_noise_over_signal.get(i).copied().unwrap_or(0.0);
            if ratio > 0.0 {
                let amp = (ratio * self.frame_power(x)).sqrt();
                let n = self.rb_unit_field(x.len(), group_seed(self.cfg.seed, "rb", wl, dir, g, i as u64))?;
                y.samples.iter_mut().zip(&n.samples).for_each(|(a, b)| *a += b * amp);
            }
            fields.push(self.add_ase(&y, osnr_db, group_seed(self.cfg.seed, "ase", wl, dir, g, i as u64)));
        }
        let mut rng = stream(group_seed(self.cfg.seed, "front_end", wl, dir, g, 0), &[]);
        Ok(apply_front_end(&fields, front_end, &mut rng)?)
    }

    pub fn dsp_config(&self) -> DspConfig {
        DspConfig {
            payload_symbols: Some(self.cfg.symbols),
            ..self.cfg.dsp.clone()
        }
    }

    /// Receiver plus blind alignment. Failures become rows, never errors.
    pub fn measure(&self, rg: &ReceivedGroup, fields: &[ComplexEnvelope], dsp: &DspConfig) -> GroupOutcome {
        let core = self.physical_core(rg.group.0);
        let ids = ModeId::group(core, rg.group.1, rg.direction);
        let wl = rg.wavelength;
        let fail_all = |why: String| GroupOutcome {
            rows: ids.iter().map(|id| LinkRow::failed(*id, wl, why.clone())).collect(),
            output: None,
            aligned: vec![None; MODES_PER_GROUP],
        };
        let out = match receive(fields, &self.map, dsp) {
            Ok(o) => o,
            Err(e) => return fail_all(format!("dsp: {e}")),
        };
        let aligned = match align_group(&out.bits, &rg.refs, &self.cfg.ber) {
            Ok(a) => a,
            Err(e) => return fail_all(format!("alignment: {e}")),
        };
        let mut per_mode: Vec<Option<(usize, AlignedBer)>> = vec![None; MODES_PER_GROUP];
        let mut failures = Vec::new();
        for (o, r) in aligned.into_iter().enumerate() {
            match r {
                Ok((j, a)) if per_mode[j].is_none() => per_mode[j] = Some((o, a)),
                Ok((j, _)) => failures.push(format!("output {o} duplicates mode {j}")),
                Err(e) => failures.push(format!("output {o}: {e}")),
            }
        }
        let mut failures = failures.into_iter();
        let rows = ids
            .iter()
            .zip(&per_mode)
            .map(|(id, m)| match m {
                Some((o, a)) => {
                    let (snr, evm) = snr_evm(&out.symbols[*o], &self.map);
                    LinkRow::measured(*id, wl, a.ber, (a.ci_low, a.ci_high), snr, evm)
                }
                None => LinkRow::failed(*id, wl, failures.next().unwrap_or_else(|| "no output locked".into())),
            })
            .collect();
        GroupOutcome {
            rows,
            output: Some(out),
            aligned: per_mode,
        }
    }
}

pub fn opposite(d: Direction) -> Direction {
    match d {
        Direction::Forward => Direction::Backward,
        Direction::Backward => Direction::Forward,
    }
}

/// Linear noise-to-signal ratio of a detected ratio in dB (0 when infinite).
pub fn noise_over_signal(r: &DetectedRatio) -> f64 {
    if r.ratio_db.is_finite() {
        10f64.powf(-r.ratio_db / 10.0)
    } else {
        0.0
    }
}

/// Runs `f` on a pool of `threads` workers (0 = all cores).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
