//! Microbenchmark crate; see `benches/solvers.rs`.
