#![allow(dead_code)]

use std::path::PathBuf;

use nbk::runs::{enumerate_runs, System};
use nbk::scenario::Scenario;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"))
}

pub fn load(name: &str) -> (Scenario, System) {
    let scenario = Scenario::load(&scenario_path(name)).expect("scenario loads");
    let system = enumerate_runs(&scenario.spec).expect("scenario enumerates");
    (scenario, system)
}

/// Every scenario file shipped with the crate, by name.
pub fn all_scenarios() -> Vec<String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "toml").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}
