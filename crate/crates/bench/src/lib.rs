//! Benchmarks for crowdship-core live in `benches/`.
