//! Criterion benchmarks for the extraction and matching pipeline; see `benches/`.
