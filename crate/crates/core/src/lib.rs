//! Deterministic parallel agent-based epidemic simulation over weekly visit
//! schedules.
//!
//! Persons follow a fixed weekly schedule of location visits. Each simulated
//! day they choose an action (mask, distancing, dropping visits), meet the
//! people they overlap with, and catch infections through an exact
//! per-location Gillespie draw. Disease progression follows a configurable
//! state machine with sampled dwell times.

pub mod behavior;
pub mod config;
pub mod disease;
pub mod engine;
pub mod output;
pub mod population;
pub mod rng;
pub mod runner;
pub mod schema;

pub use behavior::{Action, BehaviorModel, GlobalObservables, LocalObservable, ScaleFactors};
pub use config::{load_config, validate_config, Config, ConfigError};
pub use disease::{default_seir_model, DiseaseModel, HealthState};
pub use engine::{run, EngineError, EngineOptions, Simulation, SimulationOutputs, TransitionRecord};
pub use population::{Person, Population, PopulationError, Visit};
pub use output::{write_outputs, OutputError, OutputFiles, OutputWriter};
pub use runner::{run_config, RunError, RunSummary};
