use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use sdmlink::fiberchan::unitary::unitarity_error;
use sdmlink::fiberchan::*;
use sdmlink::rng;
use sdmlink::signal::mean_power;
use sdmlink::{ComplexEnvelope, Direction, ModeId};

const FS: f64 = 24e9;
const F: Direction = Direction::Forward;

/// Band-limited random group inputs with quiet edges, so zero-padded
/// delays up to 50 ns lose nothing.
fn random_group_inputs(core: u8, mg: u8, len: usize, seed: u64) -> ModeSignals {
    ModeId::group(core, mg, F)
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let mut x = band_limited(len, rng::derive_seed(seed, &[core as u64, mg as u64, i as u64]));
            let quiet_tail = if len > 4096 { 1400 } else { 64 };
            x[..64].fill(Complex64::new(0.0, 0.0));
            x[len - quiet_tail..].fill(Complex64::new(0.0, 0.0));
            (id, ComplexEnvelope::new(x, FS))
        })
        .collect()
}

fn random_periodic_inputs(core: u8, mg: u8, len: usize, seed: u64) -> ModeSignals {
    ModeId::group(core, mg, F)
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, ComplexEnvelope::new(band_limited(len, seed * 4 + i as u64), FS)))
        .collect()
}

fn band_limited(len: usize, seed: u64) -> Vec<Complex64> {
    let mut r = rng::stream(seed, &[]);
    let mut spec = vec![Complex64::new(0.0, 0.0); len];
    for (k, v) in spec.iter_mut().enumerate() {
        let f = sdmlink::spectral::bin_frequency(k, len);
        if f.abs() < 0.25 {
            *v = Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5);
        }
    }
    sdmlink::spectral::ifft(&mut spec);
    spec
}

#[test]
fn same_seed_same_channel() {
    let p = default_profile();
    assert_eq!(build_channel(&p, 11).unwrap(), build_channel(&p, 11).unwrap());
    let a = build_channel(&p, 11).unwrap();
    let b = build_channel(&p, 12).unwrap();
    assert_ne!(a.link(F).groups[0].mixing, b.link(F).groups[0].mixing);
}

#[test]
fn mixings_unitary_and_dmd_bounded() {
    let p = default_profile();
    let ch = build_channel(&p, 5).unwrap();
    for dir in [Direction::Forward, Direction::Backward] {
        for g in &ch.link(dir).groups {
            assert!(unitarity_error(&g.mixing) < 1e-10);
            assert!(g.delay_spread_ps() <= 250.0 + 1e-9);
            assert!(g.delay_spread_ps() >= 250.0 - 1e-9);
            assert!(g.delays_ps.iter().sum::<f64>().abs() < 1e-9);
        }
    }
}

#[test]
fn zero_dmd_gives_equal_delays() {
    let mut p = default_profile();
    p.intra_dmd_ps_per_km = vec![0.0; 3];
    let ch = build_channel(&p, 5).unwrap();
    for g in &ch.link(F).groups {
        assert_eq!(g.delays_ps, [0.0; 4]);
    }
}

#[test]
fn directions_independent_unless_reciprocal() {
    let mut p = default_profile();
    let ch = build_channel(&p, 8).unwrap();
    assert_ne!(
        ch.link(F).groups[0].mixing,
        ch.link(Direction::Backward).groups[0].mixing.transpose()
    );
    p.reciprocal = true;
    let ch = build_channel(&p, 8).unwrap();
    assert_eq!(
        ch.link(F).groups[0].mixing,
        ch.link(Direction::Backward).groups[0].mixing.transpose()
    );
}

#[test]
fn transparent_channel_only_delays() {
    let p = FiberProfile::transparent(1, &[2, 3], 5.0);
    let mut ch = build_channel(&p, 1).unwrap();
    ch.set_identity_mixing();
    let len = 4096;
    let mut inp = ModeSignals::new();
    for mg in [2, 3] {
        for (i, id) in ModeId::group(1, mg, F).into_iter().enumerate() {
            inp.insert(id, ComplexEnvelope::new(band_limited(len, i as u64 + 10 * mg as u64), FS));
        }
    }
    let out = ch.propagate(&inp, F).unwrap();
    // |l| = 3 arrives 25 ns = 600 samples later.
    for (id, x) in &inp {
        let y = &out[id];
        let shift = if id.mode_group() == 2 { 0 } else { 600 };
        assert_eq!(y.delay_samples, shift as f64);
        for t in 0..len - shift {
            assert!((y.samples[t + shift] - x.samples[t]).norm() < 1e-12);
        }
        for t in 0..shift {
            assert!(y.samples[t].norm() < 1e-12);
        }
    }
}

#[test]
fn group_power_conserved_without_loss_or_crosstalk() {
    let mut p = FiberProfile::transparent(1, &[2, 3, 4], 5.0);
    p.intra_dmd_ps_per_km = vec![50.0; 3];
    let ch = build_channel(&p, 21).unwrap();
    let inp = random_periodic_inputs(1, 3, 2048, 3);
    let out = ch
        .propagate_with(&inp, F, PropagateOptions { circular: true })
        .unwrap();
    let pin: f64 = inp.values().map(|e| e.mean_power()).sum();
    let pout: f64 = out.values().map(|e| e.mean_power()).sum();
    assert!(((pout - pin) / pin).abs() < 1e-10);
}

#[test]
fn fiber_loss_of_lowest_group_is_1p57_db() {
    let mut p = default_profile();
    p.xt_intermg_db = None;
    p.xt_intercore_db = None;
    p.mux_insertion_loss_db = vec![0.0; 3];
    p.demux_insertion_loss_db = vec![0.0; 3];
    p.bidir_split_loss_db = 0.0;
    let ch = build_channel(&p, 2).unwrap();
    let inp = random_periodic_inputs(1, 2, 2048, 4);
    let out = ch.propagate_with(&inp, F, PropagateOptions { circular: true }).unwrap();
    let pin: f64 = inp.values().map(|e| e.mean_power()).sum();
    let pout: f64 = out.values().map(|e| e.mean_power()).sum();
    assert!((10.0 * (pin / pout).log10() - 1.57).abs() < 1e-9);
}

#[test]
fn received_power_follows_budget_ledger() {
    let p = default_profile().restricted_to(&[0, 1]).unwrap();
    let ch = build_channel(&p, 9).unwrap();
    let mut inp = ModeSignals::new();
    for core in [1, 2] {
        for mg in [2, 3, 4] {
            inp.extend(random_group_inputs(core, mg, 8192, 40 + mg as u64));
        }
    }
    let out = ch.propagate(&inp, F).unwrap();
    for (mi, mg) in [2u8, 3, 4].into_iter().enumerate() {
        let ids = ModeId::group(1, mg, F);
        let pin: f64 = ids.iter().map(|i| inp[i].mean_power()).sum();
        let pout: f64 = ids.iter().map(|i| out[i].mean_power()).sum();
        let ledger = p.mux_insertion_loss_db[mi]
            + p.bidir_split_loss_db
            + p.fiber_loss_db(0, mi)
            + p.demux_insertion_loss_db[mi];
        let got = 10.0 * (pin / pout).log10();
        assert!((got - ledger).abs() < 0.1, "|l|={mg}: {got} vs {ledger}");
    }
}

#[test]
fn measured_crosstalk_matches_configuration() {
    let p = default_profile();
    for seed in [1, 2] {
        let ch = build_channel(&p, seed).unwrap();
        let xt = measure_crosstalk(&ch, F).unwrap();
        assert!((xt.worst_intermg_db() + 12.0).abs() < 0.5, "{}", xt.worst_intermg_db());
        assert!((xt.worst_intercore_db() + 20.0).abs() < 0.5);
        let mg3 = xt.intermg_aggregate_db(4, 3).unwrap();
        let mg2 = xt.intermg_aggregate_db(4, 2).unwrap();
        assert!((mg3 + 12.0).abs() < 0.5 && mg2 < mg3);
    }
}

#[test]
fn transparent_channel_has_no_crosstalk() {
    let ch = build_channel(&FiberProfile::transparent(2, &[2, 3], 5.0), 3).unwrap();
    let xt = measure_crosstalk(&ch, F).unwrap();
    for (h, row) in xt.db.iter().enumerate() {
        for (g, v) in row.iter().enumerate() {
            if g != h {
                assert_eq!(*v, f64::NEG_INFINITY);
            }
        }
    }
}

#[test]
fn two_core_analogue_keeps_intercore_aggregate() {
    let p = default_profile().restricted_to(&[0, 1]).unwrap();
    let xt = measure_crosstalk(&build_channel(&p, 4).unwrap(), F).unwrap();
    assert!((xt.intercore_aggregate_db(1, 3).unwrap() + 20.0).abs() < 0.5);
}

#[test]
fn inline_crosstalk_adds_little_at_5km() {
    let mut p = default_profile().restricted_to(&[0]).unwrap();
    p.inline_xt.enabled = true;
    let xt = measure_crosstalk(&build_channel(&p, 4).unwrap(), F).unwrap();
    assert!((xt.worst_intermg_db() + 12.0).abs() < 0.5);
}

#[test]
fn impulse_peaks_separated_by_dgd() {
    let p = default_profile();
    let ch = build_channel(&p, 6).unwrap();
    let ir = impulse_response(&ch, 1, &[2, 3], F, FS).unwrap();
    assert_eq!(ir.peaks_s.len(), 2, "{:?}", ir.peaks_s);
    let sep = ir.peaks_s[1] - ir.peaks_s[0];
    assert!((sep - 25e-9).abs() <= ir.sample_period_s, "{sep}");
    let one = impulse_response(&ch, 1, &[4], F, FS).unwrap();
    assert_eq!(one.peaks_s.len(), 1);
}

#[test]
fn zero_drift_step_is_identity() {
    let ch0 = build_channel(&default_profile(), 1).unwrap();
    let mut ch = ch0.clone();
    ch.advance_drift(0.0, &mut rng::stream(1, &[])).unwrap();
    assert_eq!(ch, ch0);
    assert!(ch.advance_drift(-1.0, &mut rng::stream(1, &[])).is_err());
}

#[test]
fn drift_preserves_unitarity_over_1000_steps() {
    let p = default_profile().restricted_to(&[0]).unwrap();
    let mut ch = build_channel(&p, 1).unwrap();
    let u0 = ch.link(F).groups[0].mixing;
    let mut r = rng::stream(2, &[]);
    for _ in 0..1000 {
        ch.advance_drift(0.01, &mut r).unwrap();
    }
    for g in &ch.link(F).groups {
        assert!(unitarity_error(&g.mixing) < 1e-8);
    }
    assert!((ch.link(F).groups[0].mixing - u0).norm() > 1e-3);
}

#[test]
fn drifting_group_redistributes_but_conserves_power() {
    let mut p = FiberProfile::transparent(1, &[2], 5.0);
    p.drift_rad_per_s = 1e7;
    let mut ch = build_channel(&p, 3).unwrap();
    let len = 1 << 15;
    let mut inp = ModeSignals::new();
    let ids = ModeId::group(1, 2, F);
    for (i, id) in ids.iter().enumerate() {
        let v = if i == 0 { 1.0 } else { 0.0 };
        inp.insert(*id, ComplexEnvelope::new(vec![Complex64::new(v, 0.0); len], FS));
    }
    let out = ch.propagate_drifting(&inp, F, 1024, &mut rng::stream(4, &[])).unwrap();
    let win = 1024;
    let mut port0 = Vec::new();
    for w in (win..len - win).step_by(win) {
        let total: f64 = ids.iter().map(|i| mean_power(&out[i].samples[w..w + win])).sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        port0.push(mean_power(&out[&ids[0]].samples[w..w + win]));
    }
    let lo = port0.iter().cloned().fold(f64::MAX, f64::min);
    let hi = port0.iter().cloned().fold(f64::MIN, f64::max);
    assert!(hi - lo > 0.05, "{lo} {hi}");
}

#[test]
fn incomplete_group_rejected() {
    let ch = build_channel(&default_profile(), 1).unwrap();
    let mut inp = random_group_inputs(1, 2, 256, 1);
    inp.pop_first();
    assert!(ch.propagate(&inp, F).is_err());
    let mut inp = random_group_inputs(1, 2, 256, 1);
    inp.values_mut().next().unwrap().samples.pop();
    assert!(ch.propagate(&inp, F).is_err());
}

#[test]
fn infinite_osnr_is_identity() {
    let x = ComplexEnvelope::new(band_limited(1024, 1), FS);
    let y = add_optical_noise(&x, f64::INFINITY, OSNR_REF_BANDWIDTH_HZ, &mut rng::stream(1, &[]));
    assert_eq!(x, y);
}

#[test]
fn osnr_measured_in_reference_bandwidth() {
    let n = 200_000;
    let x = ComplexEnvelope::new(vec![Complex64::new(0.3, 0.4); n], FS);
    let y = add_optical_noise(&x, 18.0, OSNR_REF_BANDWIDTH_HZ, &mut rng::stream(7, &[]));
    let noise: Vec<Complex64> = y.samples.iter().zip(&x.samples).map(|(a, b)| a - b).collect();
    let in_ref = mean_power(&noise) * OSNR_REF_BANDWIDTH_HZ / FS;
    let osnr = 10.0 * (x.mean_power() / in_ref).log10();
    assert!((osnr - 18.0).abs() < 0.1, "{osnr}");
    let again = add_optical_noise(&x, 18.0, OSNR_REF_BANDWIDTH_HZ, &mut rng::stream(7, &[]));
    assert_eq!(y, again);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn propagation_is_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let p = default_profile().restricted_to(&[0, 1]).unwrap();
        let ch = build_channel(&p, seed).unwrap();
        let mut x_full = random_group_inputs(1, 3, 512, seed);
        x_full.extend(random_group_inputs(2, 3, 512, seed + 1));
        let mut y = random_group_inputs(1, 3, 512, seed + 2);
        y.extend(random_group_inputs(2, 3, 512, seed + 3));
        let comb: ModeSignals = x_full.iter().map(|(k, v)| {
            let s = v.samples.iter().zip(&y[k].samples).map(|(u, w)| u * a + w * b).collect();
            (*k, ComplexEnvelope::new(s, FS))
        }).collect();
        let ox = ch.propagate(&x_full, F).unwrap();
        let oy = ch.propagate(&y, F).unwrap();
        let oc = ch.propagate(&comb, F).unwrap();
        let mut err = 0.0;
        let mut norm = 0.0;
        for (k, v) in &oc {
            for t in 0..v.len() {
                let want = ox[k].samples[t] * a + oy[k].samples[t] * b;
                err += (v.samples[t] - want).norm_sqr();
                norm += want.norm_sqr();
            }
        }
        prop_assert!(err.sqrt() <= 1e-10 * norm.sqrt().max(1e-300));
    }

    #[test]
    fn unitarity_survives_random_drift(seed in 0u64..1000, steps in 1usize..200, dt in 0.0f64..0.5) {
        let p = default_profile().restricted_to(&[0]).unwrap();
        let mut ch = build_channel(&p, seed).unwrap();
        let mut r = rng::stream(seed, &[1]);
        for _ in 0..steps {
            ch.advance_drift(dt, &mut r).unwrap();
        }
        for g in &ch.link(F).groups {
            prop_assert!(unitarity_error(&g.mixing) < 1e-8);
        }
    }
}
