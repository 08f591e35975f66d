//! Criterion benchmarks for the hot paths of `locest-core`; see `benches/`.
