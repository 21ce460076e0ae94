//! Averaged time-domain simulation of the converter cases and the passive
//! oracle, with perturbation injection and the step-load scenario.

pub mod config;
pub mod inject;
pub mod integrate;
pub mod model;
pub mod step;

pub use config::{Case, CaseConfig, ModelConfig, OracleConfig, Preset, SimSettings};
pub use inject::{inject_signal, InjectionRun, InjectionSpec};
pub use integrate::{
    complex_eigenvalues, find_equilibrium, run_time_domain, steady_state_gate, OperatingPoint,
    RunSpec, SimRecord,
};
pub use model::{build_model, passive_oracle_model, ConverterModel, PassiveRl, Plant};
pub use step::{run_step_test, StepResult, StepSchedule, Trend};
