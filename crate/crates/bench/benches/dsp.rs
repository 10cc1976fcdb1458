use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use sdmlink::metrics::{align_and_ber, BerConfig};
use sdmlink::rxdsp::{mimo_equalize, EqualizerConfig, MimoEqualizerState, NoCount};
use sdmlink::txgen::{map_8qam, pulse_shape, transmit_group, PrbsGenerator, PulseShaper, QamSymbolMap};

const SYMBOLS: usize = 10_000;

fn pulse_shaping(c: &mut Criterion) {
    let map = QamSymbolMap::star_8qam();
    let shaper = PulseShaper::default_for(12e9);
    let bits = PrbsGenerator::new(1).unwrap().bits(SYMBOLS * 3).unwrap();
    let symbols = map_8qam(&bits, &map).unwrap();
    let mut g = c.benchmark_group("pulse_shape");
    g.throughput(Throughput::Elements(SYMBOLS as u64));
    g.bench_function("rrc_2sps", |b| b.iter(|| pulse_shape(black_box(&symbols), &shaper).unwrap()));
    g.finish();
}

fn equalizer(c: &mut Criterion) {
    let map = QamSymbolMap::star_8qam();
    let shaper = PulseShaper::default_for(12e9);
    let tx = transmit_group(4, SYMBOLS, 1, &map, &shaper, 0).unwrap();
    let inputs: Vec<&[_]> = tx.iter().map(|w| &w.envelope.samples[..]).collect();
    let cfg = EqualizerConfig::default();
    let mut g = c.benchmark_group("mimo_equalize");
    g.throughput(Throughput::Elements(SYMBOLS as u64));
    g.bench_function("4x4_default_taps", |b| {
        b.iter(|| {
            let mut s = MimoEqualizerState::new(4, &cfg, &map).unwrap();
            mimo_equalize(black_box(&inputs), &mut s, &cfg, &mut NoCount).unwrap()
        })
    });
    g.finish();
}

fn ber(c: &mut Criterion) {
    let mut gen = PrbsGenerator::new(12345).unwrap();
    let reference = gen.descriptor();
    gen.advance(777);
    let rx = gen.bits(sdmlink::metrics::MIN_BER_BITS + SYMBOLS * 3).unwrap();
    let cfg = BerConfig::default();
    let mut g = c.benchmark_group("align_and_ber");
    g.throughput(Throughput::Elements(rx.len() as u64));
    g.bench_function("prbs18_offset", |b| b.iter(|| align_and_ber(black_box(&rx), &reference, &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, pulse_shaping, equalizer, ber);
criterion_main!(benches);
