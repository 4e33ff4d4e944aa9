//! Criterion benchmarks for `splinepath`; see `benches/`.
