//! Benchmarks for the scoring, classification and aggregation hot paths;
//! see `benches/pipeline.rs`.
