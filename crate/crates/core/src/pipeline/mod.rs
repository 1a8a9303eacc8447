//! Synthetic experiments, file artifacts and the two-stage inversion driver.

pub mod config;
pub mod io;
pub mod plot;
pub mod run;
pub mod synthetic;
pub mod targets;

pub use config::ExperimentConfig;
pub use plot::emit_plots;
pub use run::{
    compute_report, run_full_pipeline, run_generate, run_spectrum, run_stage_a, run_stage_b, RunReport, Timings,
};
pub use synthetic::{generate_synthetic, SyntheticData};
pub use targets::{benchmark_target, TargetKind};
