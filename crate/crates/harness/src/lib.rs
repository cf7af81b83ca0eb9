//! Scenario engine for the dual detection workbench: scenario files, the
//! closed-loop simulation, trace export, structural checks and the CLI.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod engine;
pub mod repro;
pub mod trace;
pub mod verify;

pub use config::{load_config, parse_config, ConfigError, ScenarioConfig};
pub use engine::{design_loop, run_batch, run_scenario, EngineError, LoopDesign};
pub use trace::{SimulationTrace, StepRecord, TraceError};
