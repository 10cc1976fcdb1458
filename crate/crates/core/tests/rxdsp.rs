use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use sdmlink::fiberchan::{build_channel, FiberChannel, FiberProfile, ModeSignals, PropagateOptions};
use sdmlink::metrics::{align_group, BerConfig};
use sdmlink::rng;
use sdmlink::rxdsp::*;
use sdmlink::txgen::{pulse_shape, transmit_group, PrbsDescriptor, PulseShaper, QamSymbolMap, TxWaveform};
use sdmlink::{ComplexEnvelope, Direction, ModeId};

const BAUD: f64 = 12e9;
const FS: f64 = 24e9;
const F: Direction = Direction::Forward;

fn map() -> QamSymbolMap {
    QamSymbolMap::star_8qam()
}

fn group_tx(n_sym: usize, seed: u64) -> (Vec<TxWaveform>, Vec<PrbsDescriptor>) {
    let w = transmit_group(4, n_sym, seed, &map(), &PulseShaper::default_for(BAUD), 2048).unwrap();
    let refs = w.iter().map(|x| x.prbs).collect();
    (w, refs)
}

/// Single 5 km group with the given intra-group DMD and no crosstalk.
fn group_channel(dmd_ps_per_km: f64, seed: u64) -> FiberChannel {
    let mut p = FiberProfile::transparent(1, &[3], 5.0);
    p.intra_dmd_ps_per_km = vec![dmd_ps_per_km];
    build_channel(&p, seed).unwrap()
}

fn propagate(ch: &FiberChannel, tx: &[TxWaveform]) -> Vec<ComplexEnvelope> {
    let ids = ModeId::group(1, 3, F);
    let inputs: ModeSignals = ids.iter().zip(tx).map(|(id, w)| (*id, w.envelope.clone())).collect();
    let out = ch.propagate(&inputs, F).unwrap();
    ids.iter().map(|id| out[id].clone()).collect()
}

fn dsp(n_sym: usize) -> DspConfig {
    DspConfig { payload_symbols: Some(n_sym), ..DspConfig::default() }
}

fn bers(out: &DspOutput, refs: &[PrbsDescriptor]) -> Vec<(usize, f64)> {
    align_group(&out.bits, refs, &BerConfig::default())
        .unwrap()
        .into_iter()
        .map(|r| {
            let (j, a) = r.unwrap();
            (j, a.ber)
        })
        .collect()
}

/// Channel response at DC, `h[port][mode]`, from constant probes.
fn channel_dc(ch: &FiberChannel) -> Vec<Vec<Complex64>> {
    let ids = ModeId::group(1, 3, F);
    let mut h = vec![vec![Complex64::new(0.0, 0.0); 4]; 4];
    for (j, id) in ids.iter().enumerate() {
        let inputs: ModeSignals = ids
            .iter()
            .map(|k| {
                let v = if k == id { 1.0 } else { 0.0 };
                (*k, ComplexEnvelope::new(vec![Complex64::new(v, 0.0); 4096], FS))
            })
            .collect();
        let out = ch.propagate_with(&inputs, F, PropagateOptions { circular: true }).unwrap();
        for (p, pid) in ids.iter().enumerate() {
            h[p][j] = out[pid].samples[2048];
        }
    }
    h
}

/// Energy outside the dominant entry of each row, relative to it, in dB
/// (worst row), plus the column chosen per row.
fn permutation_residual_db(g: &[Vec<Complex64>]) -> (f64, Vec<usize>) {
    let mut worst = f64::NEG_INFINITY;
    let mut cols = Vec::new();
    for row in g {
        let (j, peak) = row
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.norm_sqr()))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        let rest: f64 = row.iter().map(|v| v.norm_sqr()).sum::<f64>() - peak;
        worst = worst.max(10.0 * (rest / peak).log10());
        cols.push(j);
    }
    (worst, cols)
}

fn matmul(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    (0..a.len())
        .map(|i| (0..b[0].len()).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

#[test]
fn back_to_back_identity_is_error_free() {
    let n = 60_000;
    let (tx, refs) = group_tx(n, 1);
    let mut ch = group_channel(0.0, 1);
    ch.set_identity_mixing();
    let rx = propagate(&ch, &tx);
    let out = receive(&rx, &map(), &dsp(n)).unwrap();
    for (o, (j, ber)) in bers(&out, &refs).into_iter().enumerate() {
        assert_eq!(j, o);
        assert_eq!(ber, 0.0);
    }
    // Off-diagonal energy stays far below the centre tap.
    let eq = &out.equalizer;
    for o in 0..4 {
        let centre = eq.tap(o, o, eq.n_taps / 2).norm_sqr();
        let off: f64 = (0..4)
            .filter(|&p| p != o)
            .flat_map(|p| (0..eq.n_taps).map(move |k| (p, k)))
            .map(|(p, k)| eq.tap(o, p, k).norm_sqr())
            .sum();
        assert!(10.0 * (off / centre).log10() < -20.0, "output {o}");
    }
}

#[test]
fn unitary_channel_with_dmd_is_unscrambled() {
    let n = 60_000;
    let (tx, refs) = group_tx(n, 2);
    let ch = group_channel(50.0, 2);
    let rx = propagate(&ch, &tx);
    let out = receive(&rx, &map(), &dsp(n)).unwrap();
    assert!(out.report.converged);
    let g = matmul(&out.equalizer.dc_response(), &channel_dc(&ch));
    let (res, cols) = permutation_residual_db(&g);
    assert!(res < -15.0, "residual {res} dB");
    let b = bers(&out, &refs);
    for ((j, ber), c) in b.iter().zip(&cols) {
        // The PRBS alignment and the channel matrix agree on the permutation.
        assert_eq!(j, c);
        assert_eq!(*ber, 0.0);
    }
}

#[test]
fn outputs_separate_distinct_sources() {
    for seed in 0..20u64 {
        let n = 30_000;
        let (tx, _) = group_tx(n, 100 + seed);
        let ch = group_channel(50.0, 100 + seed);
        let rx = propagate(&ch, &tx);
        let cfg = DspConfig {
            payload_symbols: Some(n),
            equalizer: EqualizerConfig { preconverge_symbols: 30_000, ..EqualizerConfig::default() },
            ..DspConfig::default()
        };
        let out = receive(&rx, &map(), &cfg).unwrap();
        let g = matmul(&out.equalizer.dc_response(), &channel_dc(&ch));
        let (res, mut cols) = permutation_residual_db(&g);
        assert!(res < -15.0, "seed {seed}: residual {res} dB");
        cols.sort();
        assert_eq!(cols, vec![0, 1, 2, 3], "seed {seed}");
    }
}

fn noisy(rx: &[ComplexEnvelope], snr_db: f64, seed: u64) -> Vec<ComplexEnvelope> {
    // SNR per symbol at the matched-filter output: noise power in the
    // 24 GHz simulation bandwidth is twice that in the 12 GHz signal band.
    let mut r = rng::stream(seed, &[rng::tag("awgn")]);
    rx.iter()
        .map(|s| {
            let p = sdmlink::signal::mean_power(&s.samples[1024..s.len() - 4096]);
            let w = rng::complex_gaussian(&mut r, s.len(), 2.0 * p * 10f64.powf(-snr_db / 10.0));
            let mut o = s.clone();
            o.samples.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
            o
        })
        .collect()
}

fn mean_ber(out: &DspOutput, refs: &[PrbsDescriptor]) -> f64 {
    let b = bers(out, refs);
    b.iter().map(|x| x.1).sum::<f64>() / b.len() as f64
}

#[test]
fn fifteen_taps_cover_dmd_and_three_do_not() {
    let n = 60_000;
    let (tx, refs) = group_tx(n, 3);
    let ch = group_channel(50.0, 3);
    let rx = noisy(&propagate(&ch, &tx), 14.0, 3);
    let run = |taps: usize| {
        let cfg = DspConfig {
            payload_symbols: Some(n),
            equalizer: EqualizerConfig { n_taps: taps, ..EqualizerConfig::default() },
            ..DspConfig::default()
        };
        match receive(&rx, &map(), &cfg) {
            Ok(out) => match align_group(&out.bits, &refs, &BerConfig::default()).unwrap().into_iter().collect::<Result<Vec<_>, _>>() {
                Ok(v) => v.iter().map(|(_, a)| a.ber).fold(0.0, f64::max),
                Err(_) => 1.0,
            },
            Err(_) => 1.0,
        }
    };
    let b15 = run(15);
    let b3 = run(3);
    assert!(b15 < 2.4e-2, "15 taps: {b15}");
    assert!(b3 > 2.4e-2, "3 taps: {b3}");
}

#[test]
fn tap_export_shape() {
    let cfg = EqualizerConfig::default();
    let st = MimoEqualizerState::new(4, &cfg, &map()).unwrap();
    let v: Vec<Vec<Vec<[f64; 2]>>> = serde_json::from_str(&st.taps_json().unwrap()).unwrap();
    assert_eq!((v.len(), v[0].len(), v[0][0].len()), (4, 4, 15));
    assert_eq!(v[2][2][7], [1.0, 0.0]);
    assert_eq!(v[2][1][7], [0.0, 0.0]);
}

#[test]
fn even_or_oversized_tap_counts_are_rejected() {
    for n_taps in [0, 4, 17] {
        let cfg = EqualizerConfig { n_taps, ..EqualizerConfig::default() };
        assert!(MimoEqualizerState::new(4, &cfg, &map()).is_err());
    }
}

#[test]
fn divergence_is_reported() {
    let n = 8192;
    let (tx, _) = group_tx(n, 4);
    let ch = group_channel(50.0, 4);
    let rx = propagate(&ch, &tx);
    let cfg = DspConfig {
        payload_symbols: Some(n),
        equalizer: EqualizerConfig { step_size: 5.0, ..EqualizerConfig::default() },
        foe: FoeConfig { min_symbols: 1024, ..FoeConfig::default() },
        ..DspConfig::default()
    };
    match receive(&rx, &map(), &cfg) {
        Err(sdmlink::Error::AdaptationFailure { tap_energy, .. }) => assert!(!(tap_energy < 1e3)),
        other => panic!("expected adaptation failure, got {:?}", other.map(|o| o.report)),
    }
}

#[test]
fn common_quarter_turn_changes_nothing() {
    let n = 40_000;
    let (tx, refs) = group_tx(n, 5);
    let ch = group_channel(50.0, 5);
    let rx = noisy(&propagate(&ch, &tx), 9.0, 5);
    let turned: Vec<ComplexEnvelope> = rx
        .iter()
        .map(|s| ComplexEnvelope { samples: s.samples.iter().map(|v| v * Complex64::i()).collect(), ..s.clone() })
        .collect();
    let a = receive(&rx, &map(), &dsp(n)).unwrap();
    let b = receive(&turned, &map(), &dsp(n)).unwrap();
    let (ba, bb) = (bers(&a, &refs), bers(&b, &refs));
    assert!(ba.iter().any(|x| x.1 > 0.0));
    assert_eq!(ba, bb);
}

#[test]
fn arbitrary_input_phases_keep_noiseless_link_error_free() {
    let n = 40_000;
    let (mut tx, refs) = group_tx(n, 6);
    let mut r = rng::stream(6, &[rng::tag("phases")]);
    for w in &mut tx {
        let ph = Complex64::from_polar(1.0, r.random_range(0.0..2.0 * PI));
        w.envelope.samples.iter_mut().for_each(|v| *v *= ph);
    }
    let ch = group_channel(50.0, 6);
    let out = receive(&propagate(&ch, &tx), &map(), &dsp(n)).unwrap();
    assert_eq!(mean_ber(&out, &refs), 0.0);
}

/// Matched-filtered, power-normalized ports as the equalizer sees them.
fn equalizer_inputs(rx: &[ComplexEnvelope]) -> Vec<Vec<Complex64>> {
    let shaper = PulseShaper::default_for(BAUD);
    let mf: Vec<ComplexEnvelope> = rx.iter().map(|s| shaper.matched_filter(s)).collect();
    let p = mf.iter().map(|s| s.mean_power()).sum::<f64>() / 4.0;
    mf.iter()
        .map(|s| timing_recovery(&s.scaled(1.0 / p.sqrt())).unwrap().0.samples)
        .collect()
}

#[test]
fn dispersion_decreases_until_stage_switch() {
    let map = map();
    let r2 = map.cma_modulus_sq();
    for seed in 0..10u64 {
        let n = 40_000;
        let (tx, _) = group_tx(n, 200 + seed);
        let ch = group_channel(50.0, 200 + seed);
        let rx = noisy(&propagate(&ch, &tx), 16.0, 200 + seed);
        let x = equalizer_inputs(&rx);
        let refs: Vec<&[Complex64]> = x.iter().map(|v| v.as_slice()).collect();
        let cfg = EqualizerConfig::default();
        let mut st = MimoEqualizerState::new(4, &cfg, &map).unwrap();
        let y = mimo_equalize(&refs, &mut st, &cfg, &mut NoCount).unwrap();
        let switch = st.stage_switch_symbol.expect("stage switch");
        // Start once the frame is fully inside the equalizer.
        let start = 600;
        let mut prev: Option<(f64, f64)> = None;
        for w in (start..switch).step_by(1000).take_while(|w| w + 1000 <= switch) {
            let d: Vec<f64> = (w..w + 1000)
                .flat_map(|k| y.iter().map(move |o| (r2 - o[k].norm_sqr()).powi(2)))
                .collect();
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
            let se = (var / d.len() as f64).sqrt();
            if let Some((pm, pse)) = prev {
                // Non-increasing up to three standard errors of the two estimates.
                assert!(mean <= pm + 3.0 * (se * se + pse * pse).sqrt(), "seed {seed} window {w}: {mean} after {pm}");
            }
            prev = Some((mean, se));
        }
    }
}

#[test]
fn multiplication_counter_matches_closed_form() {
    let mut r = rng::stream(7, &[rng::tag("triples")]);
    for _ in 0..10 {
        let m = r.random_range(1..=4usize);
        let n_taps = 2 * r.random_range(0..8usize) + 1;
        let b = r.random_range(1..=6usize);
        let cfg = EqualizerConfig { n_taps, ..EqualizerConfig::default() };
        let mut st = MimoEqualizerState::new(m, &cfg, &map()).unwrap();
        let n_sym = 3000;
        let x: Vec<Vec<Complex64>> = (0..m).map(|_| rng::complex_gaussian(&mut r, 2 * n_sym, 1.0)).collect();
        let refs: Vec<&[Complex64]> = x.iter().map(|v| v.as_slice()).collect();
        let mut c = CountingMul::default();
        mimo_equalize(&refs, &mut st, &cfg, &mut c).unwrap();
        // Each output channel carries b bits per symbol.
        let bits = (m * n_sym * b) as u64;
        let per_bit = num_rational::Ratio::new(c.muls as i128, bits as i128);
        assert_eq!(per_bit, sdmlink::metrics::rncm_per_bit(m, n_taps, b).unwrap(), "M={m} N={n_taps} b={b}");
    }
}

fn random_symbols(n: usize, seed: u64) -> Vec<Complex64> {
    let map = map();
    let mut r = rng::stream(seed, &[rng::tag("symbols")]);
    (0..n).map(|_| map.point(r.random_range(0..8u8))).collect()
}

fn with_awgn(s: &[Complex64], snr_db: f64, seed: u64) -> Vec<Complex64> {
    let mut r = rng::stream(seed, &[rng::tag("awgn")]);
    let w = rng::complex_gaussian(&mut r, s.len(), 10f64.powf(-snr_db / 10.0));
    s.iter().zip(&w).map(|(a, b)| a + b).collect()
}

fn with_offset(s: &[Complex64], df: f64) -> Vec<Complex64> {
    s.iter()
        .enumerate()
        .map(|(n, v)| v * Complex64::from_polar(1.0, 2.0 * PI * df * n as f64 / BAUD))
        .collect()
}

#[test]
fn foe_recovers_offsets() {
    let cfg = FoeConfig::default();
    for (df, seed) in [(0.0, 1), (100e6, 2), (-730e6, 3), (1.4e9, 4)] {
        let y = with_offset(&with_awgn(&random_symbols(1 << 14, seed), 10.0, seed), df);
        let est = freq_offset_estimate(&[&y], BAUD, &cfg).unwrap();
        assert!((est - df).abs() <= 1e6, "{df}: {est}");
    }
}

#[test]
fn foe_rejects_unambiguous_range_violation_and_short_blocks() {
    let y = random_symbols(1 << 14, 1);
    let wide = FoeConfig { search_range_hz: BAUD / 4.0, ..FoeConfig::default() };
    assert!(matches!(freq_offset_estimate(&[&y], BAUD, &wide), Err(sdmlink::Error::FrequencyRange { .. })));
    assert!(matches!(
        freq_offset_estimate(&[&y[..1000]], BAUD, &FoeConfig::default()),
        Err(sdmlink::Error::InsufficientLength { .. })
    ));
}

#[test]
fn foe_accuracy_improves_with_block_length() {
    let cfg = FoeConfig { min_symbols: 1 << 12, ..FoeConfig::default() };
    let mean_err = |n: usize| {
        (0..20u64)
            .map(|seed| {
                let df = 37e6 + 1e6 * seed as f64;
                let y = with_offset(&with_awgn(&random_symbols(n, 50 + seed), 10.0, 50 + seed), df);
                (freq_offset_estimate(&[&y], BAUD, &cfg).unwrap() - df).abs()
            })
            .sum::<f64>()
            / 20.0
    };
    let (short, long) = (mean_err(1 << 12), mean_err(1 << 16));
    assert!(long < short, "2^16: {long}, 2^12: {short}");
}

#[test]
fn cpe_removes_constant_phase() {
    let s = random_symbols(5000, 8);
    let theta = PI / 7.0;
    let y: Vec<Complex64> = s.iter().map(|v| v * Complex64::from_polar(1.0, theta)).collect();
    let (out, phase) = carrier_phase_estimate(&y, &map(), &CpeConfig::default()).unwrap();
    for p in &phase {
        let err = (p - theta).to_degrees();
        let err = err - 90.0 * (err / 90.0).round();
        assert!(err.abs() < 0.5, "{err}");
    }
    // Equal to the input up to one common quarter turn.
    let k = (0..4)
        .min_by(|&a, &b| {
            let d = |k: i32| (out[0] - s[0] * Complex64::i().powi(k)).norm();
            d(a).total_cmp(&d(b))
        })
        .unwrap();
    let rot = Complex64::i().powi(k);
    assert!(out.iter().zip(&s).all(|(o, a)| (o - a * rot).norm() < 1e-9));
}

#[test]
fn cpe_is_identity_without_phase_noise() {
    let s = random_symbols(3000, 9);
    let (out, _) = carrier_phase_estimate(&s, &map(), &CpeConfig::default()).unwrap();
    assert!(out.iter().zip(&s).all(|(o, a)| (o - a).norm() < 1e-12));
}

#[test]
fn linewidth_penalty_is_small() {
    let n = 100_000;
    let s = random_symbols(n, 10);
    let clean = with_awgn(&s, 15.0, 10);
    let mut r = rng::stream(10, &[rng::tag("laser")]);
    let phi = wiener_phase(n, 100e3, 1.0 / BAUD, &mut r);
    let walked: Vec<Complex64> = clean.iter().zip(&phi).map(|(v, p)| v * Complex64::from_polar(1.0, *p)).collect();
    let evm = |y: &[Complex64]| {
        let (out, _) = carrier_phase_estimate(y, &map(), &CpeConfig::default()).unwrap();
        sdmlink::metrics::snr_evm(&out, &map()).1
    };
    let (e0, e1) = (evm(&clean), evm(&walked));
    assert!(e1 - e0 < 1.0, "EVM {e0}% -> {e1}%");
}

#[test]
fn decisions_invert_mapping() {
    let m = map();
    for l in 0..8u8 {
        let bits = demap_decide(&[m.point(l)], &m);
        assert_eq!(bits, vec![l >> 2 & 1, l >> 1 & 1, l & 1]);
    }
    // Midpoint of two inner points: tie goes to the lower label.
    let (a, b) = (m.point(0), m.point(1));
    let mid = (a + b) / 2.0;
    let la = m.decide(mid);
    assert_eq!(la, m.decide(mid), "deterministic");
    let d = |l: u8| (mid - m.point(l)).norm();
    let tied: Vec<u8> = (0..8).filter(|&l| (d(l) - d(la)).abs() < 1e-12).collect();
    assert_eq!(la, *tied.iter().min().unwrap());
}

#[test]
fn symbol_errors_at_20_db_are_rare() {
    let m = map();
    let n = 100_000;
    let mut r = rng::stream(11, &[rng::tag("labels")]);
    let labels: Vec<u8> = (0..n).map(|_| r.random_range(0..8u8)).collect();
    let s: Vec<Complex64> = labels.iter().map(|&l| m.point(l)).collect();
    let y = with_awgn(&s, 20.0, 11);
    let errors = y.iter().zip(&labels).filter(|(v, l)| m.decide(**v) != **l).count();
    assert!((errors as f64) < 1e-4 * n as f64, "{errors} symbol errors");
}

/// Shaped and matched-filtered random symbols: symbol instants on even samples.
fn shaped_mf(n: usize, seed: u64) -> ComplexEnvelope {
    let shaper = PulseShaper::default_for(BAUD);
    shaper.matched_filter(&pulse_shape(&random_symbols(n, seed), &shaper).unwrap())
}

fn circ_err(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - d.round()
}

#[test]
fn timing_offsets_are_recovered() {
    let x = shaped_mf(20_000, 12);
    let t0 = estimate_timing(&x.samples).unwrap();
    assert!(t0.abs() < 0.01, "zero offset: {t0}");
    let d = sdmlink::spectral::delay_circular(&x.samples, 0.5);
    let t = estimate_timing(&d).unwrap();
    assert!(circ_err(t, 0.25).abs() < 0.02, "0.25 symbol: {t}");
    let (fixed, _) = timing_recovery(&ComplexEnvelope::new(d.clone(), FS)).unwrap();
    assert!(estimate_timing(&fixed.samples).unwrap().abs() < 0.02);
    let loud: Vec<Complex64> = d.iter().map(|v| v * 10f64.sqrt()).collect();
    assert!(circ_err(estimate_timing(&loud).unwrap(), t).abs() < 0.02);
    assert!(estimate_timing(&d[..4000]).is_err());
}

#[test]
fn front_end_zero_is_identity() {
    let x = shaped_mf(2000, 13);
    let mut r = rng::stream(13, &[]);
    let out = apply_front_end(std::slice::from_ref(&x), &FrontEndImpairments::none(), &mut r).unwrap();
    assert_eq!(out[0].samples, x.samples);
}

#[test]
fn front_end_offset_shifts_spectrum() {
    let n = 1 << 14;
    let tone = ComplexEnvelope::new(vec![Complex64::new(1.0, 0.0); n], FS);
    let imp = FrontEndImpairments { freq_offset_hz: 300e6, ..FrontEndImpairments::none() };
    let out = apply_front_end(&[tone], &imp, &mut rng::stream(14, &[])).unwrap();
    let mut spec = out[0].samples.clone();
    sdmlink::spectral::fft(&mut spec);
    let k = (0..n).max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm())).unwrap();
    let f = sdmlink::spectral::bin_frequency(k, n) * FS;
    assert!((f - 300e6).abs() <= FS / n as f64, "{f}");
}

#[test]
fn wiener_increments_have_expected_variance() {
    let n = 200_001;
    let ts = 1.0 / FS;
    let phi = wiener_phase(n, 100e3, ts, &mut rng::stream(15, &[]));
    let inc: Vec<f64> = phi.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = inc.iter().sum::<f64>() / inc.len() as f64;
    let var = inc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (inc.len() - 1) as f64;
    let expect = 2.0 * PI * 100e3 * ts;
    assert!((var / expect - 1.0).abs() < 0.05, "{var} vs {expect}");
}

#[test]
fn full_front_end_is_tolerated() {
    let n = 60_000;
    let (tx, refs) = group_tx(n, 16);
    let ch = group_channel(50.0, 16);
    let rx = noisy(&propagate(&ch, &tx), 16.0, 16);
    let imp = FrontEndImpairments::default();
    let rx = apply_front_end(&rx, &imp, &mut rng::stream(16, &[rng::tag("frontend")])).unwrap();
    let out = receive(&rx, &map(), &dsp(n)).unwrap();
    assert!((out.report.freq_offset_estimate_hz - imp.freq_offset_hz).abs() < 1e6);
    let ber = mean_ber(&out, &refs);
    assert!(ber < 1e-3, "{ber}");
}
