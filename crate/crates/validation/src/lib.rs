//! Shared oracles for the acceptance suite.
//!
//! The suite lives in its own package so that it runs after every other
//! test target of the workspace.

use leo_dmimo::clustering::{Clusters, Epoch};
use leo_dmimo::harness::ExperimentConfig;
use leo_dmimo::pilots::PilotBook;
use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

pub fn reference_config_path() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/reference.toml"))
}

/// The checked-in reference configuration with defaults filled in.
pub fn reference_config() -> ExperimentConfig {
    ExperimentConfig::load(reference_config_path())
        .expect("reference config")
        .resolved()
}

/// Safety conditions of the cluster state after an epoch: the RSAP is a
/// member, every member is visible, every member holds the user's pilot,
/// and no satellite carries one pilot twice.
pub fn check_constraints(clusters: &Clusters, epoch: &Epoch, book: &PilotBook) -> Result<(), String> {
    for (&n, c) in clusters {
        if !c.members.contains(&c.rsap) {
            return Err(format!("t={} user {n}: RSAP {} not a member", epoch.time, c.rsap));
        }
        for m in &c.members {
            if !epoch.visibility[n].contains(m) {
                return Err(format!("t={} user {n}: member {m} not visible", epoch.time));
            }
            if book.occupant(*m, c.pilot) != Some(n) {
                return Err(format!("t={} user {n}: slot {} at {m} not held", epoch.time, c.pilot));
            }
        }
    }
    let mut slots = BTreeSet::new();
    for c in clusters.values() {
        for &m in &c.members {
            if !slots.insert((m, c.pilot)) {
                return Err(format!("t={} pilot {} reused at satellite {m}", epoch.time, c.pilot));
            }
        }
    }
    Ok(())
}

/// Outcome of one acceptance check.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub id: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(id: impl Into<String>, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// A check that could not be evaluated counts as failed.
    pub fn error(id: impl Into<String>, name: impl Into<String>, err: impl fmt::Display) -> Self {
        Self::new(id, name, false, format!("error: {err}"))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} [{}] {}: {}", self.id, self.name, self.detail)
    }
}
