//! Criterion benchmarks for the simulation kernel and the exact oracle.
//! Run with `cargo bench -p erw-bench`.
