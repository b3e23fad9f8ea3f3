//! Batch front end: configuration, workflows and file outputs.

pub mod config;
pub mod family;
pub mod table;
pub mod workflows;

pub use config::{Overrides, RunConfig, Sizes, Workflow};
pub use family::FamilyPreset;
pub use table::Table;
pub use workflows::{
    forest_validation, likelihood_validation, run, run_evaluate, run_search, run_sweep, run_validate, sweep_curve, Report,
};

/// Machine-readable error line for failed runs.
pub fn error_record(e: &discrim::Error) -> String {
    let kind = format!("{e:?}");
    let kind = kind.split(['(', ' ', '{']).next().unwrap_or("Error").to_string();
    serde_json::json!({ "error": { "kind": kind, "message": e.to_string() } }).to_string()
}

/// Exit status for a failed run: 2 for configuration errors, 1 otherwise.
pub fn exit_code(e: &discrim::Error) -> i32 {
    match e {
        discrim::Error::Config(_) => 2,
        _ => 1,
    }
}
