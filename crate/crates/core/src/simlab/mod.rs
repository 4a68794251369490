//! Simulation designs, scoring and a seeded parallel Monte Carlo runner.

pub mod dgp;
pub mod eval;
pub mod runner;

pub use dgp::{simulate, DgpKind, DgpSpec, SimulatedPanel};
pub use eval::{evaluate, Bucket, EvalSummary, ReplicateRecord};
pub use runner::{derive_seed, monte_carlo, monte_carlo_with_threads, run_replicate};
