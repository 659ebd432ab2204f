//! Criterion benchmarks for the pregame pipeline; see `benches/pipeline.rs`.
