//! Run configuration: parameters, budgets and output location.
//!
//! The on-disk format is TOML. Every section is optional and falls back to the
//! default instance; unknown keys are rejected.

use std::path::{Path, PathBuf};

use blender_core::endo::{RawParams, ValidationMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub mode: ValidationMode,
    /// Seed for probes and samplers (the construction has its own).
    pub seed: u64,
    pub params: RawParams,
    pub budgets: Budgets,
    pub output: Output,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            mode: ValidationMode::Empirical,
            seed: 1,
            params: RawParams::d3(),
            budgets: Budgets::default(),
            output: Output::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Tangent samples for `cones` and `expansion`.
    pub samples: usize,
    pub expansion_threshold: f64,
    pub nh_samples: usize,
    pub critical_resolution: usize,
    pub persistence_eps: f64,
    pub persistence_trials: usize,
    pub inradius_steps: usize,
    pub inradius_half_width: f64,
    /// Center of the starting cube; `0.3` on every axis for `k ≥ 2` and `0`
    /// for `k = 1` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inradius_center: Option<Vec<f64>>,
    pub rigor_depth: usize,
    pub rigor_region: String,
    pub coverage_steps: usize,
    pub coverage_resolution: usize,
    pub coverage_threshold: f64,
    pub coverage_seeds: usize,
    pub control_steps: usize,
    pub trials: usize,
    pub box_half_width: f64,
    pub transitivity_samples: usize,
    pub max_iterates: usize,
    pub unstable_budget: usize,
    pub unstable_cloud: usize,
    pub stable_budget: usize,
    pub stable_cloud: usize,
    /// Fraction of trials that must hit for a probe to pass.
    pub hit_rate: f64,
    pub robustness_eps: f64,
    pub robustness_trials: usize,
    pub robustness_steps: usize,
    pub robustness_resolution: usize,
    pub robustness_threshold: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            expansion_threshold: 6.0,
            nh_samples: 10_000,
            critical_resolution: 16,
            persistence_eps: 0.4,
            persistence_trials: 100,
            inradius_steps: 5_000_000,
            inradius_half_width: 0.01,
            inradius_center: None,
            rigor_depth: 16,
            rigor_region: "ball".into(),
            coverage_steps: 10_000_000,
            coverage_resolution: 20,
            coverage_threshold: 0.99,
            coverage_seeds: 10,
            control_steps: 1_000_000,
            trials: 100,
            box_half_width: 0.05,
            transitivity_samples: 10_000,
            max_iterates: 200,
            unstable_budget: 1_000_000,
            unstable_cloud: blender_core::probes::UNSTABLE_CLOUD,
            stable_budget: 10_000_000,
            stable_cloud: blender_core::probes::STABLE_CLOUD,
            hit_rate: 0.95,
            robustness_eps: 1e-3,
            robustness_trials: 20,
            robustness_steps: 1_000_000,
            robustness_resolution: 12,
            robustness_threshold: 0.95,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization,
    /// ignoring where output goes.
    pub fn hash(&self) -> String {
        let content = Config { output: Output::default(), ..self.clone() };
        let digest = Sha256::digest(content.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let mut c = Config::default();
        c.params.p = Some(vec![-0.75, 0.1, 0.25]);
        c.params.a0 = Some(0.0625);
        c.budgets.robustness_eps = 1.0 / 3.0;
        c.budgets.inradius_center = Some(vec![0.1, -0.2]);
        c.output.dir = Some("out/run".into());
        let back = Config::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn sections_are_optional() {
        let c = Config::parse("seed = 9\n[params]\nr = 0.03\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.params, RawParams { r: 0.03, ..RawParams::d3() });
        assert_eq!(c.budgets, Budgets::default());
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::parse("sede = 3").is_err());
        assert!(Config::parse("[budgets]\nsamplez = 3").is_err());
        assert!(Config::parse("[params]\nn = 3\nfoo = 1").is_err());
        assert!(Config::parse("mode = \"lenient\"").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let b = Config { seed: 2, ..Config::default() };
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let c = Config { output: Output { dir: Some("elsewhere".into()) }, ..Config::default() };
        assert_eq!(a.hash(), c.hash());
    }
}
