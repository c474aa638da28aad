//! Criterion benchmarks for the scheduler live in `benches/`.
