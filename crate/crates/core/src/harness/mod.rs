//! Experiment runner, output emitters and theory probes.

pub mod bounds;
pub mod config;
pub mod experiment;
pub mod output;
pub mod probe;

pub use bounds::{bound_compare, bound_ewc, bound_linucb, estimate_lipschitz, gmm_l_centroids, CompareParams};
pub use config::{parse_config, ExperimentConfig, KChoice, Scenario};
pub use experiment::{run_experiment, ExperimentResult, RegretCurve, RegretMode};
pub use output::emit_outputs;
pub use probe::sample_complexity_probe;
