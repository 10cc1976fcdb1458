//! Criterion benchmarks for the hot paths of `sdmlink`; see `benches/`.
