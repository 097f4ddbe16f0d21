//! Operator surface: run configuration, the command implementations behind
//! the `futurex` binary, and static plots.

mod commands;
mod config;
pub mod plot;

pub use commands::{
    config_path_for, digests, eval, format_gradcheck, format_inference, gen_data, gradcheck, infer, k_sweep, load_model, log_path_for, train, SweepRow,
    TrainSummary, GRADCHECK_STEP,
};
pub use config::{DataConfig, Paths, RunConfig, TrainOptions, CONFIG_ENV};
