// Benchmarks live under benches/; see `cargo bench -p matfact-bench`.
