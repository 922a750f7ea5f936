//! Criterion benchmarks for paraverify live under `benches/`.
