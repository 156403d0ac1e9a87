//! Benchmark harness for the `sparse-bht` solvers.
//!
//! # Overview
//! This crate packages the experiment protocols behind the `sbht` binary so
//! they can also be driven programmatically (the integration tests do
//! exactly that). The pieces are deliberately small:
//!
//! - [`seed`]: the master-seed derivation chain and instance hashing that
//!   make every run reproducible and every instance regenerable in
//!   isolation.
//! - [`config`]: layered run configuration (defaults, optional TOML file,
//!   CLI overrides) and the `config.resolved` provenance emission.
//! - [`registry`]: solver names and uniform dispatch onto the library's
//!   iterative and greedy solvers.
//! - [`rows`]: the fixed result-row schema, deterministic CSV emission, and
//!   mean/stddev aggregation.
//! - [`experiments`]: the drivers for the sweep, diagnostic, stability,
//!   codec, timing, and single-instance subcommands.
//!
//! All experiments follow a paired design: at a given grid point and trial,
//! every solver consumes byte-identical instance data, and each row records
//! a hash of those bytes so pairing can be audited after the fact.

pub mod config;
pub mod experiments;
pub mod registry;
pub mod rows;
pub mod seed;
