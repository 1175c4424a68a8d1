//! Experiment driver: configs, initial states, ε sweeps, checks and output.

pub mod checks;
pub mod config;
pub mod experiment;
pub mod output;

pub use checks::{run_checks, CheckOutcome, CheckReport};
pub use config::{ExperimentConfig, HeisenbergSymbolKind, InitialState, ParticleStateSpec};
pub use experiment::{
    build_initial_state, qc_distance, run_configured_heisenberg, run_convergence_experiment,
    run_heisenberg_experiment, ExperimentResult, ObservableFamily, QcDistance, ResultRow,
};
