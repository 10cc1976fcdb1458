use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use super::profile::FiberProfile;
use super::unitary::{block_with_energy, haar_unitary, unit_hermitian, unitary_part, Mat4};
use crate::error::{Error, Result};
use crate::rng;
use crate::signal::{check_aligned, ComplexEnvelope, Direction, ModeId, MODES_PER_GROUP};
use crate::spectral;

pub type ModeSignals = BTreeMap<ModeId, ComplexEnvelope>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Strongly coupled degenerate modes of one group in one core.
#[derive(Debug, Clone, PartialEq)]
pub struct IntraGroupChannel {
    pub mixing: Mat4,
    /// Per-output-port delay around the group's bulk delay, zero mean.
    pub delays_ps: [f64; MODES_PER_GROUP],
    /// Generator radians per simulated second.
    pub drift_rate: f64,
}

impl IntraGroupChannel {
    pub fn delay_spread_ps(&self) -> f64 {
        let max = self.delays_ps.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.delays_ps.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    /// One random-walk step on the unitary group: U <- U exp(i eps H).
    pub fn advance<R: Rng + ?Sized>(&mut self, dt_s: f64, rng: &mut R) {
        let eps = self.drift_rate * dt_s;
        if eps == 0.0 {
            return;
        }
        let h = unit_hermitian(rng);
        let step = (h * Complex64::new(0.0, eps)).exp();
        self.mixing = unitary_part(&(self.mixing * step));
    }
}

/// Leakage from group `from` into group `to` (indices into the channel's group list).
#[derive(Debug, Clone, PartialEq)]
pub struct XtBlock {
    pub to: usize,
    pub from: usize,
    pub matrix: Mat4,
}

/// One end module: a per-group insertion loss, the through-path amplitude
/// and the crosstalk blocks it injects.
#[derive(Debug, Clone, PartialEq)]
pub struct MuxDemuxMatrix {
    /// Per mode group, dB.
    pub insertion_loss_db: Vec<f64>,
    /// Per group (core-major), amplitude.
    pub through: Vec<f64>,
    pub xt_blocks: Vec<XtBlock>,
}

/// The frozen realization of one propagation direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRealization {
    pub groups: Vec<IntraGroupChannel>,
    pub mux: MuxDemuxMatrix,
    pub demux: MuxDemuxMatrix,
    /// Distributed crosstalk, one block list per fiber section (empty when disabled).
    pub inline_sections: Vec<Vec<XtBlock>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PropagateOptions {
    /// Treat inputs as periodic: delays wrap around instead of zero-padding.
    pub circular: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberChannel {
    pub profile: FiberProfile,
    pub seed: u64,
    links: [LinkRealization; 2],
}

struct Schedule {
    block_samples: usize,
    /// `[group][block]`
    mixings: Vec<Vec<Mat4>>,
}

fn db_amp(db: f64) -> f64 {
    10f64.powf(-db / 20.0)
}

fn transpose_blocks(blocks: &[XtBlock]) -> Vec<XtBlock> {
    blocks
        .iter()
        .map(|b| XtBlock {
            to: b.from,
            from: b.to,
            matrix: b.matrix.transpose(),
        })
        .collect()
}

impl LinkRealization {
    fn reversed(&self) -> Self {
        Self {
            groups: self
                .groups
                .iter()
                .map(|g| IntraGroupChannel {
                    mixing: g.mixing.transpose(),
                    ..g.clone()
                })
                .collect(),
            mux: self.mux.clone(),
            demux: MuxDemuxMatrix {
                xt_blocks: transpose_blocks(&self.demux.xt_blocks),
                ..self.demux.clone()
            },
            inline_sections: self
                .inline_sections
                .iter()
                .rev()
                .map(|s| transpose_blocks(s))
                .collect(),
        }
    }
}

/// Draws every random element of a channel from `seed`. Intra-group mixings
/// are Haar unitaries; crosstalk blocks are Gaussian, rescaled so each
/// configured level is hit exactly.
pub fn build_channel(profile: &FiberProfile, seed: u64) -> Result<FiberChannel> {
    profile.validate()?;
    let forward = draw_link(profile, seed, Direction::Forward);
    let backward = if profile.reciprocal {
        forward.reversed()
    } else {
        draw_link(profile, seed, Direction::Backward)
    };
    Ok(FiberChannel {
        profile: profile.clone(),
        seed,
        links: [forward, backward],
    })
}

fn draw_link(p: &FiberProfile, seed: u64, dir: Direction) -> LinkRealization {
    let n_mg = p.mode_groups.len();
    let n_groups = p.cores * n_mg;
    let mut r = rng::stream(seed, &[rng::tag("fiberchan"), dir.index() as u64]);

    let mut groups = Vec::with_capacity(n_groups);
    for gi in 0..n_groups {
        let mg = gi % n_mg;
        let spread = p.intra_dmd_ps_per_km[mg] * p.length_km;
        let mixing = haar_unitary(&mut r);
        let mut d = [
            -spread / 2.0,
            spread / 2.0,
            r.random_range(-0.5..=0.5) * spread,
            r.random_range(-0.5..=0.5) * spread,
        ];
        d.shuffle(&mut r);
        let mean = d.iter().sum::<f64>() / 4.0;
        d.iter_mut().for_each(|x| *x -= mean);
        groups.push(IntraGroupChannel {
            mixing,
            delays_ps: d,
            drift_rate: p.drift_rad_per_s,
        });
    }

    // Target leak level p[to][from], relative to the surviving power of `from`.
    let level = |to: usize, from: usize| -> f64 {
        let (tc, tm) = (to / n_mg, to % n_mg);
        let (fc, fm) = (from / n_mg, from % n_mg);
        if to == from {
            0.0
        } else if tc == fc {
            p.intermg_pair_level(fm, tm)
        } else if tm == fm {
            p.intercore_pair_level()
        } else {
            0.0
        }
    };
    let through: Vec<f64> = (0..n_groups)
        .map(|from| {
            let out: f64 = (0..n_groups).map(|to| level(to, from)).sum();
            (1.0 / (1.0 + out)).sqrt()
        })
        .collect();
    let mut xt_blocks = Vec::new();
    for to in 0..n_groups {
        for from in 0..n_groups {
            let lv = level(to, from);
            if lv > 0.0 {
                let e = 4.0 * through[from] * through[from] * lv;
                xt_blocks.push(XtBlock {
                    to,
                    from,
                    matrix: block_with_energy(&mut r, e),
                });
            }
        }
    }

    let mut inline_sections = Vec::new();
    if p.inline_xt.enabled {
        let s = p.inline_xt.sections;
        let lv = 10f64.powf(p.inline_xt.db_per_km / 10.0) * p.length_km / s as f64;
        for _ in 0..s {
            let mut blocks = Vec::new();
            for to in 0..n_groups {
                for from in 0..n_groups {
                    if to / n_mg == from / n_mg && (to % n_mg).abs_diff(from % n_mg) == 1 {
                        blocks.push(XtBlock {
                            to,
                            from,
                            matrix: block_with_energy(&mut r, 4.0 * lv),
                        });
                    }
                }
            }
            inline_sections.push(blocks);
        }
    }

    LinkRealization {
        groups,
        mux: MuxDemuxMatrix {
            insertion_loss_db: p
                .mux_insertion_loss_db
                .iter()
                .map(|l| l + p.bidir_split_loss_db)
                .collect(),
            through: vec![1.0; n_groups],
            xt_blocks: Vec::new(),
        },
        demux: MuxDemuxMatrix {
            insertion_loss_db: p.demux_insertion_loss_db.clone(),
            through,
            xt_blocks,
        },
        inline_sections,
    }
}

impl FiberChannel {
    pub fn link(&self, dir: Direction) -> &LinkRealization {
        &self.links[dir.index()]
    }

    pub fn link_mut(&mut self, dir: Direction) -> &mut LinkRealization {
        &mut self.links[dir.index()]
    }

    pub fn n_groups(&self) -> usize {
        self.profile.cores * self.profile.mode_groups.len()
    }

    /// Index of (1-based core, |l|) in the group list.
    pub fn group_index(&self, core: u8, mode_group: u8) -> Option<usize> {
        let mg = self.profile.mg_index(mode_group)?;
        let c = (core as usize).checked_sub(1)?;
        (c < self.profile.cores).then(|| c * self.profile.mode_groups.len() + mg)
    }

    /// (1-based core, |l|) of a group index.
    pub fn group_key(&self, gi: usize) -> (u8, u8) {
        let n_mg = self.profile.mode_groups.len();
        ((gi / n_mg + 1) as u8, self.profile.mode_groups[gi % n_mg])
    }

    /// Replaces every intra-group mixing with the identity.
    pub fn set_identity_mixing(&mut self) {
        for link in &mut self.links {
            for g in &mut link.groups {
                g.mixing = Mat4::identity();
            }
        }
    }

    /// Advances the intra-group drift of both directions by `dt_s`.
    /// Crosstalk blocks stay frozen.
    pub fn advance_drift<R: Rng + ?Sized>(&mut self, dt_s: f64, rng: &mut R) -> Result<()> {
        if !(dt_s >= 0.0) {
            return Err(Error::InvalidConfig(format!("negative drift step {dt_s}")));
        }
        if dt_s == 0.0 {
            return Ok(());
        }
        let dirs: &[Direction] = if self.profile.reciprocal {
            &[Direction::Forward]
        } else {
            &[Direction::Forward, Direction::Backward]
        };
        for &d in dirs {
            for g in &mut self.links[d.index()].groups {
                g.advance(dt_s, rng);
            }
        }
        self.sync_reciprocal();
        Ok(())
    }

    fn sync_reciprocal(&mut self) {
        if self.profile.reciprocal {
            self.links[1] = self.links[0].reversed();
        }
    }

    /// Propagates whole 4-mode groups through the frozen channel with
    /// zero-padded (linear) delays.
    pub fn propagate(&self, inputs: &ModeSignals, dir: Direction) -> Result<ModeSignals> {
        self.propagate_with(inputs, dir, PropagateOptions::default())
    }

    pub fn propagate_with(
        &self,
        inputs: &ModeSignals,
        dir: Direction,
        opts: PropagateOptions,
    ) -> Result<ModeSignals> {
        self.run(self.link(dir), inputs, dir, opts, None)
    }

    /// Like [`propagate`](Self::propagate) but the intra-group mixing drifts
    /// every `block_samples` samples while the signal passes, and the channel
    /// is left in its final drifted state.
    pub fn propagate_drifting<R: Rng + ?Sized>(
        &mut self,
        inputs: &ModeSignals,
        dir: Direction,
        block_samples: usize,
        rng: &mut R,
    ) -> Result<ModeSignals> {
        if block_samples == 0 {
            return Err(Error::InvalidConfig("drift block must be >= 1 sample".into()));
        }
        let first = inputs
            .values()
            .next()
            .ok_or_else(|| Error::Shape("no input signals".into()))?;
        let n = first.len();
        let dt = block_samples as f64 / first.sample_rate_hz;
        let n_blocks = n.div_ceil(block_samples).max(1);
        let li = if self.profile.reciprocal { 0 } else { dir.index() };
        let mut mixings = vec![Vec::with_capacity(n_blocks); self.n_groups()];
        for _ in 0..n_blocks {
            for (gi, g) in self.links[li].groups.iter_mut().enumerate() {
                mixings[gi].push(if li == dir.index() {
                    g.mixing
                } else {
                    g.mixing.transpose()
                });
                g.advance(dt, rng);
            }
        }
        self.sync_reciprocal();
        let sched = Schedule {
            block_samples,
            mixings,
        };
        // Blocks and delays are drift-invariant, so the post-drift link is fine here.
        self.run(self.link(dir), inputs, dir, PropagateOptions::default(), Some(&sched))
    }

    fn run(
        &self,
        link: &LinkRealization,
        inputs: &ModeSignals,
        dir: Direction,
        opts: PropagateOptions,
        sched: Option<&Schedule>,
    ) -> Result<ModeSignals> {
        let p = &self.profile;
        let n_mg = p.mode_groups.len();

        // Collect whole groups.
        let mut present: BTreeMap<usize, [Option<&ComplexEnvelope>; MODES_PER_GROUP]> =
            BTreeMap::new();
        for (id, env) in inputs {
            if id.direction != dir {
                return Err(Error::Shape(format!("{id} does not travel {dir}")));
            }
            let gi = self
                .group_index(id.core, id.mode_group())
                .ok_or_else(|| Error::Shape(format!("{id} is not a channel of this fiber")))?;
            present.entry(gi).or_insert([None; MODES_PER_GROUP])[id.index_in_group()] = Some(env);
        }
        let mut groups: Vec<(usize, [&ComplexEnvelope; MODES_PER_GROUP])> = Vec::new();
        for (gi, ports) in &present {
            let full: Option<Vec<&ComplexEnvelope>> = ports.iter().copied().collect();
            let full = full.ok_or_else(|| {
                let (c, l) = self.group_key(*gi);
                Error::Shape(format!("core {c} group {l} is missing modes"))
            })?;
            groups.push((*gi, [full[0], full[1], full[2], full[3]]));
        }
        let all: Vec<&ComplexEnvelope> = groups.iter().flat_map(|(_, e)| e.iter().copied()).collect();
        let (n, fs) = check_aligned(&all)?;
        if n == 0 {
            return Err(Error::Shape("empty input signals".into()));
        }

        // Per-port total delay in samples.
        let delays: Vec<[f64; MODES_PER_GROUP]> = groups
            .iter()
            .map(|(gi, _)| {
                let bulk = p.group_delay_s(gi % n_mg) * fs;
                link.groups[*gi].delays_ps.map(|d| bulk + d * 1e-12 * fs)
            })
            .collect();
        let (lead, nfft) = if opts.circular {
            (0, n)
        } else {
            let min = delays.iter().flatten().cloned().fold(0.0, f64::min);
            let max = delays.iter().flatten().cloned().fold(0.0, f64::max);
            let lead = (-min).ceil() as usize + 1;
            let tail = max.ceil() as usize + 1;
            (lead, spectral::fast_len(n + lead + tail))
        };

        // MUX gain and intra-group mixing, in the time domain so the mixing may vary.
        let mut spectra: Vec<Vec<Complex64>> = Vec::with_capacity(groups.len() * 4);
        for (gi, env) in &groups {
            let g = db_amp(link.mux.insertion_loss_db[gi % n_mg]) * link.mux.through[*gi];
            let fixed = [link.groups[*gi].mixing];
            let mats: &[Mat4] = match sched {
                Some(s) => &s.mixings[*gi],
                None => &fixed,
            };
            let block = sched.map_or(usize::MAX, |s| s.block_samples);
            let mut out = vec![vec![ZERO; nfft]; MODES_PER_GROUP];
            for (bi, chunk_start) in (0..n).step_by(block.min(n.max(1))).enumerate() {
                let u = mats[bi.min(mats.len() - 1)] * Complex64::new(g, 0.0);
                let end = (chunk_start + block).min(n);
                for t in chunk_start..end {
                    let x = [env[0].samples[t], env[1].samples[t], env[2].samples[t], env[3].samples[t]];
                    for (i, o) in out.iter_mut().enumerate() {
                        o[lead + t] = u[(i, 0)] * x[0] + u[(i, 1)] * x[1] + u[(i, 2)] * x[2] + u[(i, 3)] * x[3];
                    }
                }
            }
            spectra.extend(out);
        }

        // Fiber: attenuation and delays per section, optional distributed crosstalk.
        spectra.iter_mut().for_each(|s| spectral::fft(s));
        let sections = link.inline_sections.len().max(1);
        let slot: BTreeMap<usize, usize> =
            groups.iter().enumerate().map(|(k, (gi, _))| (*gi, k)).collect();
        let phasors: Vec<Vec<Complex64>> = (0..spectra.len())
            .map(|idx| {
                let (k, port) = (idx / MODES_PER_GROUP, idx % MODES_PER_GROUP);
                let gi = groups[k].0;
                let loss = p.fiber_loss_db(gi / n_mg, gi % n_mg) / sections as f64;
                delay_phasors(nfft, delays[k][port] / sections as f64, db_amp(loss))
            })
            .collect();
        for si in 0..sections {
            for (s, f) in spectra.iter_mut().zip(&phasors) {
                s.iter_mut().zip(f).for_each(|(v, w)| *v *= w);
            }
            if let Some(blocks) = link.inline_sections.get(si) {
                apply_blocks(&mut spectra, blocks, &slot, None);
            }
        }
        drop(phasors);
        spectra.iter_mut().for_each(|s| spectral::ifft(s));
        for s in spectra.iter_mut() {
            s.drain(..lead);
            s.truncate(n);
        }

        // DEMUX: insertion loss then end-module crosstalk.
        for (k, (gi, _)) in groups.iter().enumerate() {
            let g = db_amp(link.demux.insertion_loss_db[gi % n_mg]);
            for s in &mut spectra[4 * k..4 * k + 4] {
                s.iter_mut().for_each(|v| *v *= g);
            }
        }
        apply_blocks(&mut spectra, &link.demux.xt_blocks, &slot, Some(&link.demux.through));

        let mut out = ModeSignals::new();
        for (k, (gi, env)) in groups.iter().enumerate() {
            let (core, mg) = self.group_key(*gi);
            let bulk = p.group_delay_s(gi % n_mg) * fs;
            for (port, id) in ModeId::group(core, mg, dir).into_iter().enumerate() {
                out.insert(
                    id,
                    ComplexEnvelope {
                        samples: std::mem::take(&mut spectra[4 * k + port]),
                        sample_rate_hz: fs,
                        delay_samples: env[port].delay_samples + bulk,
                    },
                );
            }
        }
        Ok(out)
    }
}

/// exp(-i 2 pi f d) * amp over DFT bins, with the Nyquist bin handled as in
/// [`spectral::apply_delay_to_spectrum`].
fn delay_phasors(n: usize, d: f64, amp: f64) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(amp, 0.0); n];
    spectral::apply_delay_to_spectrum(&mut v, d);
    v
}

/// y_g = through_g x_g + sum_h B_gh x_h over the groups that are present.
/// Without `through`, the own term passes unchanged.
fn apply_blocks(
    ports: &mut [Vec<Complex64>],
    blocks: &[XtBlock],
    slot: &BTreeMap<usize, usize>,
    through: Option<&[f64]>,
) {
    let active: Vec<&XtBlock> = blocks
        .iter()
        .filter(|b| slot.contains_key(&b.to) && slot.contains_key(&b.from))
        .collect();
    if active.is_empty() && through.is_none() {
        return;
    }
    let src: Vec<Vec<Complex64>> = if active.is_empty() { Vec::new() } else { ports.to_vec() };
    for (&gi, &k) in slot {
        if let Some(t) = through {
            for s in &mut ports[4 * k..4 * k + 4] {
                s.iter_mut().for_each(|v| *v *= t[gi]);
            }
        }
    }
    for b in active {
        let (kt, kf) = (slot[&b.to], slot[&b.from]);
        for i in 0..MODES_PER_GROUP {
            for j in 0..MODES_PER_GROUP {
                let c = b.matrix[(i, j)];
                let x = &src[4 * kf + j];
                ports[4 * kt + i].iter_mut().zip(x).for_each(|(y, x)| *y += c * x);
            }
        }
    }
}
