//! Scenario-driven front end for `polydisc-core`: parse scenario files, run
//! the checks they name, and emit JSON or text reports.

pub mod error;
pub mod report;
pub mod run;
pub mod scenario;

pub use error::ScenarioError;
pub use report::{emit, parse_json, Format, Report};
pub use run::{run_batch, run_scenario};
pub use scenario::{load_scenario, parse_scenario, Scenario};

use std::path::{Path, PathBuf};

/// Expands directories into their `.scn` files, sorted by name.
pub fn collect_scenario_paths(inputs: &[PathBuf]) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "scn"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Worst exit code over a batch.
pub fn batch_exit_code(reports: &[Report]) -> i32 {
    reports.iter().map(Report::exit_code).max().unwrap_or(0)
}

pub fn load_all(paths: &[PathBuf]) -> Result<Vec<Scenario>, (PathBuf, ScenarioError)> {
    paths
        .iter()
        .map(|p| load_scenario(Path::new(p)).map_err(|e| (p.clone(), e)))
        .collect()
}
