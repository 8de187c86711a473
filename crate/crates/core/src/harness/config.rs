use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::channel::RadioConfig;
use crate::clustering::{ClusterPolicy, RsapCriterion};
use crate::downlink::PrecoderMode;
use crate::error::{ConfigErrors, Error, Result};
use crate::geometry::GeometryConfig;

/// Environment variable that overrides `output.directory`.
pub const OUTPUT_DIR_ENV: &str = "LEO_DMIMO_OUTPUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotConfig {
    pub tau_p: usize,
    pub tau_c: usize,
}

/// Channel knowledge used to build precoders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsiMode {
    Lmmse,
    /// Genie-aided `ĥ = h`.
    Perfect,
}

impl CsiMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Lmmse => "lmmse",
            Self::Perfect => "perfect",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    #[serde(default = "all_clusters")]
    pub clusters: Vec<ClusterPolicy>,
    #[serde(default = "all_criteria")]
    pub criteria: Vec<RsapCriterion>,
    #[serde(default = "all_precoders")]
    pub precoders: Vec<PrecoderMode>,
    #[serde(default = "lmmse_only")]
    pub csi: Vec<CsiMode>,
}

fn all_clusters() -> Vec<ClusterPolicy> {
    vec![ClusterPolicy::Uc, ClusterPolicy::Fc, ClusterPolicy::Nct]
}
fn all_criteria() -> Vec<RsapCriterion> {
    vec![RsapCriterion::BestChannel, RsapCriterion::MaxServiceTime]
}
fn all_precoders() -> Vec<PrecoderMode> {
    vec![PrecoderMode::PhaseAware, PrecoderMode::Asynchronous]
}
fn lmmse_only() -> Vec<CsiMode> {
    vec![CsiMode::Lmmse]
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            clusters: all_clusters(),
            criteria: all_criteria(),
            precoders: all_precoders(),
            csi: lmmse_only(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub num_drops: usize,
    pub trials_per_drop: usize,
    #[serde(default = "d_epoch")]
    pub epoch_step_s: f64,
    /// Length of the clustering simulation; `0` skips it.
    #[serde(default = "d_horizon")]
    pub horizon_s: f64,
    pub seed: u64,
}

fn d_epoch() -> f64 {
    30.0
}
fn d_horizon() -> f64 {
    3600.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Jsonl,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "d_dir")]
    pub directory: String,
    #[serde(default = "d_formats")]
    pub formats: Vec<OutputFormat>,
}

fn d_dir() -> String {
    "results".into()
}
fn d_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Jsonl, OutputFormat::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: d_dir(),
            formats: d_formats(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    pub pilot: PilotConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Parses TOML text. Syntax and type errors come back as a single
    /// field error under `<toml>`; call [`validate`](Self::validate) for
    /// the semantic checks.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let mut errs = ConfigErrors::default();
            errs.push("<toml>", e.to_string().trim_end());
            Error::Config(errs)
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn errors(&self) -> ConfigErrors {
        let mut errs = ConfigErrors::default();
        self.geometry.validate(&mut errs);
        self.radio.validate(&mut errs);
        let p = &self.pilot;
        if p.tau_p == 0 {
            errs.push("pilot.tau_p", "must be at least 1");
        }
        if p.tau_c <= p.tau_p {
            errs.push("pilot.tau_c", "must exceed pilot.tau_p");
        }
        let pol = &self.policy;
        for (field, empty) in [
            ("policy.clusters", pol.clusters.is_empty()),
            ("policy.criteria", pol.criteria.is_empty()),
            ("policy.precoders", pol.precoders.is_empty()),
            ("policy.csi", pol.csi.is_empty()),
        ] {
            if empty {
                errs.push(field, "must list at least one entry");
            }
        }
        let mc = &self.monte_carlo;
        if mc.trials_per_drop == 0 {
            errs.push("monte_carlo.trials_per_drop", "must be at least 1");
        }
        if !(mc.epoch_step_s > 0.0 && mc.epoch_step_s.is_finite()) {
            errs.push("monte_carlo.epoch_step_s", "must be positive");
        }
        if !(mc.horizon_s >= 0.0 && mc.horizon_s.is_finite()) {
            errs.push("monte_carlo.horizon_s", "must be non-negative");
        } else if mc.epoch_step_s > 0.0 && mc.horizon_s / mc.epoch_step_s > 1e6 {
            errs.push("monte_carlo.horizon_s", "more than 1e6 epochs");
        }
        if self.output.directory.is_empty() {
            errs.push("output.directory", "must not be empty");
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.errors();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Copy with every derived value filled in and list entries deduplicated,
    /// so the echo states exactly what was simulated.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.geometry.resolve();
        c.radio.resolve();
        c.policy.clusters.sort();
        c.policy.clusters.dedup();
        c.policy.criteria.sort();
        c.policy.criteria.dedup();
        c.policy.precoders.sort();
        c.policy.precoders.dedup();
        c.policy.csi.sort();
        c.policy.csi.dedup();
        c
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// `output.directory`, unless the override variable is set.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => PathBuf::from(&self.output.directory),
        }
    }
}
