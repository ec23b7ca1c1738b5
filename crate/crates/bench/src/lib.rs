//! Benchmark harness; the benchmarks live in `benches/`.
