//! Criterion benchmarks for the simulator hot paths live in `benches/`.
