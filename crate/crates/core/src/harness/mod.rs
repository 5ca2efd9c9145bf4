//! Simulation grid: scenario enumeration, seeded iterations, resumable records
//! and scenario summaries.

pub mod bootstrap;
pub mod config;
pub mod grid;
pub mod methods;
pub mod rng;
pub mod runner;
pub mod store;
pub mod summary;

pub use bootstrap::{bootstrap_selection_frequencies, DEFAULT_BOOTSTRAP};
pub use config::{enumerate_scenarios, file_safe_id, GridConfig, RunConfig};
pub use grid::{run_grid, run_scenario, GridOutcome};
pub use methods::{MethodId, MethodSpec, Route};
pub use rng::{iteration_seed, stream_rng, Stream};
pub use runner::{run_iteration, IterationRecord, MethodIteration, MethodRun, RunSettings, Session};
pub use summary::{summarize, MethodSummary, ScenarioSummary};
