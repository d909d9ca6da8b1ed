//! Holds the `acceptance` test target, which checks the toolkit end to end and
//! prints one pass/fail line per criterion. Run it after the CLI binary is built:
//! `cargo test --workspace` or `cargo build -p diffprobe-cli && cargo test -p diffprobe-tests`.
