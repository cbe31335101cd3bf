//! Elephant random walks on Cayley trees of free products
//! `Z^{*d1} * Z2^{*d2}`.
//!
//! The walker recalls a uniformly chosen past step and repeats it with
//! probability `p`, otherwise it takes one of the other `d - 1` generators.
//! This crate provides
//!
//! - the group and reduced-word walker ([`group`], [`walker`]),
//! - the step law and its reinforced variants, sampled from step counts
//!   alone ([`sampler`]),
//! - path observables and rate constants ([`observables`]),
//! - an exact small-horizon oracle by path enumeration ([`oracle`]),
//! - deterministic replica ensembles with mergeable statistics
//!   ([`montecarlo`]),
//! - slope fits and goodness-of-fit statistics ([`analysis`]).

pub mod analysis;
pub mod error;
pub mod group;
pub mod montecarlo;
pub mod observables;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod walker;

pub use error::{Error, Result};
pub use group::{Generator, GeneratorKind, GroupPresentation};
pub use montecarlo::{
    distance_census, run_ensemble, run_replica, CheckpointRow, CheckpointStats, EnsembleSummary, FinalRow,
    Histogram, MomentAccumulator, RunConfig,
};
pub use observables::{ObservableTrace, RateSchedule, Regime};
pub use oracle::{compare_variants, enumerate_exact, ExactDistribution};
pub use sampler::{MemoryConfig, StepLaw, UrnCounts};
pub use walker::WalkerState;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
