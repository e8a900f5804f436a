//! Experiment configuration: JSON schema, defaults, validation, and dotted
//! key-path overrides.
//!
//! The resolved configuration (file + defaults + overrides) round-trips
//! through JSON so a run's `config.json` echo is machine-diffable and
//! fully reproducible.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{GenerationSpec, PerturbationSpec};
use crate::error::{Error, Result};
use crate::oracle::OracleSpec;
use crate::policy::ImfbHyperparams;

pub const OUTPUT_DIR_ENV: &str = "IMFB_OUTPUT_DIR";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphSource {
    /// Seeded directed G(n, m).
    Synthetic { nodes: usize, edges: usize },
    /// SNAP-style edge list on disk.
    File {
        path: PathBuf,
        #[serde(default)]
        symmetrize: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Imfb,
    Cucb,
    EpsGreedy,
    Imlinucb,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsGreedyParams {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    0.1
}

impl Default for EpsGreedyParams {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImLinUcbParams {
    #[serde(default = "default_one")]
    pub c_explore: f64,
    #[serde(default = "default_one")]
    pub lambda: f64,
}

fn default_one() -> f64 {
    1.0
}

impl Default for ImLinUcbParams {
    fn default() -> Self {
        Self {
            c_explore: 1.0,
            lambda: 1.0,
        }
    }
}

/// Policy choice plus per-policy hyperparameter sections. All sections are
/// always present (with defaults) so every config key has a stable dotted
/// path for overrides and the echo shows every default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    #[serde(default)]
    pub imfb: ImfbHyperparams,
    #[serde(default, rename = "eps-greedy")]
    pub eps_greedy: EpsGreedyParams,
    #[serde(default)]
    pub imlinucb: ImLinUcbParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub generation: GenerationSpec,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(rename = "K")]
    pub k: usize,
    /// T, the number of rounds per run.
    pub rounds: usize,
    pub runs: usize,
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    std::env::var(OUTPUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|_| PathBuf::from("out"))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be >= 1".into()));
        }
        if self.runs < 1 {
            return Err(Error::Config("runs must be >= 1".into()));
        }
        if let GraphSource::Synthetic { nodes, edges } = &self.graph {
            let (nodes, edges) = (*nodes, *edges);
            if nodes < 1 {
                return Err(Error::Config("graph.nodes must be >= 1".into()));
            }
            if edges > nodes * nodes.saturating_sub(1) {
                return Err(Error::Config(
                    "graph.edges exceeds the simple-digraph maximum".into(),
                ));
            }
        }
        self.generation
            .validate()
            .map_err(|e| Error::Config(format!("generation: {e}")))?;
        self.perturbation
            .validate()
            .map_err(|e| Error::Config(format!("perturbation: {e}")))?;
        self.oracle
            .validate()
            .map_err(|e| Error::Config(format!("oracle: {e}")))?;
        self.policy
            .imfb
            .validate()
            .map_err(|e| Error::Config(format!("policy.imfb: {e}")))?;
        if !(0.0..=1.0).contains(&self.policy.eps_greedy.epsilon) {
            return Err(Error::Config(
                "policy.eps-greedy.epsilon must be in [0, 1]".into(),
            ));
        }
        if self.policy.imlinucb.lambda <= 0.0 {
            return Err(Error::Config("policy.imlinucb.lambda must be > 0".into()));
        }
        if self.policy.imlinucb.c_explore < 0.0 {
            return Err(Error::Config(
                "policy.imlinucb.c_explore must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Fully-resolved JSON echo, defaults included.
    pub fn resolved_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Load a config file, apply `key=value` overrides on dotted paths, and
/// validate. Returns the typed config; its `resolved_json` is the echo.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let input: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    let config: ExperimentConfig = serde_json::from_value(input.clone())
        .map_err(|e| Error::Config(format!("schema violation: {e}")))?;
    let mut resolved = config.resolved_json();
    check_unknown_keys(&input, &resolved, "")?;
    for ov in overrides {
        apply_override(&mut resolved, ov)?;
    }
    let config: ExperimentConfig = serde_json::from_value(resolved)
        .map_err(|e| Error::Config(format!("schema violation after overrides: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// Every key in the input must exist in the resolved serialization;
/// anything else is a typo the schema would silently drop.
fn check_unknown_keys(input: &serde_json::Value, resolved: &serde_json::Value, path: &str) -> Result<()> {
    if let (Some(in_map), Some(res_map)) = (input.as_object(), resolved.as_object()) {
        for (key, value) in in_map {
            let child_path = if path.is_empty() {
                key.clone()
            } else {
                format!("{path}.{key}")
            };
            match res_map.get(key) {
                None => return Err(Error::Config(format!("unknown key `{child_path}`"))),
                Some(res_child) => check_unknown_keys(value, res_child, &child_path)?,
            }
        }
    }
    Ok(())
}

/// Apply one `dotted.path=value` override in place. The path must name an
/// existing key of the resolved config.
fn apply_override(resolved: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw_value) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not of the form key=value")))?;
    let value: serde_json::Value = serde_json::from_str(raw_value)
        .unwrap_or_else(|_| serde_json::Value::String(raw_value.to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    let mut cursor = &mut *resolved;
    for (i, segment) in segments.iter().enumerate() {
        let map = cursor
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("`{}` is not an object", segments[..i].join("."))))?;
        if !map.contains_key(*segment) {
            return Err(Error::Config(format!("unknown key `{path}`")));
        }
        if i == segments.len() - 1 {
            map.insert(segment.to_string(), value);
            return Ok(());
        }
        cursor = map.get_mut(*segment).expect("key present");
    }
    unreachable!("override paths are non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::GenerationMode;

    fn base_config() -> serde_json::Value {
        serde_json::json!({
            "graph": {"kind": "synthetic", "nodes": 20, "edges": 60},
            "generation": {"mode": "uniform", "dim": 3, "rng_seed": 7},
            "policy": {"kind": "imfb"},
            "K": 2,
            "rounds": 5,
            "runs": 2,
            "master_seed": 99,
            "output_dir": "out"
        })
    }

    fn write_config(value: &serde_json::Value) -> tempfile::NamedTempFile {
        let file = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(file.path(), serde_json::to_string(value).unwrap()).unwrap();
        file
    }

    #[test]
    fn defaults_resolve_and_echo() {
        let file = write_config(&base_config());
        let config = load_config(file.path(), &[]).unwrap();
        let echo = config.resolved_json();
        assert_eq!(echo["policy"]["imfb"]["q"], serde_json::json!(0.9));
        assert_eq!(echo["policy"]["eps-greedy"]["epsilon"], serde_json::json!(0.1));
        assert_eq!(echo["perturbation"]["scale"], serde_json::json!(1.0));
        assert_eq!(config.generation.mode, GenerationMode::Uniform);
    }

    #[test]
    fn overrides_apply_and_report_unknown_keys() {
        let file = write_config(&base_config());
        let config =
            load_config(file.path(), &["policy.kind=cucb".into(), "K=0".into()]).unwrap();
        assert_eq!(config.policy.kind, PolicyKind::Cucb);
        assert_eq!(config.k, 0);

        let err = load_config(file.path(), &["policy.bogus=1".into()]).unwrap_err();
        assert!(err.to_string().contains("policy.bogus"), "{err}");
    }

    #[test]
    fn q_out_of_range_names_key() {
        let file = write_config(&base_config());
        let err = load_config(file.path(), &["policy.imfb.q=1.5".into()]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("policy.imfb") && msg.contains("(0, 1)"), "{msg}");
    }

    #[test]
    fn unknown_file_key_errors() {
        let mut value = base_config();
        value["typo_key"] = serde_json::json!(1);
        let file = write_config(&value);
        let err = load_config(file.path(), &[]).unwrap_err();
        assert!(err.to_string().contains("typo_key"), "{err}");
    }

    #[test]
    fn missing_required_field_errors() {
        let mut value = base_config();
        value.as_object_mut().unwrap().remove("rounds");
        let file = write_config(&value);
        assert!(load_config(file.path(), &[]).is_err());
    }
}
