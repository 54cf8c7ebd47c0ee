//! Criterion benchmarks for the tseba core live under `benches/`.
