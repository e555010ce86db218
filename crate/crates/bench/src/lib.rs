//! Criterion benchmarks for the surge kernels live in `benches/`.
