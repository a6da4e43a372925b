//! Experiment configuration: JSON on disk, strict validation up front, and
//! a stable hash for manifests.
//!
//! The schema, with defaults in parentheses:
//!
//! ```json
//! {
//!   "environment": {"gridworld": {"width": 5, "height": 5, "walls": [[1,1]],
//!                                 "goal": [4,4], "slip_prob": 0.1,
//!                                 "duplication": {"balanced": 16},
//!                                 "gamma": 0.95, "start": [0,0]}},
//!   "method": "trail-tabular",          // trail-ebm | trail-linear | trail-tabular | bc
//!   "data":  {"m": 10000, "n": 50, "expert_epsilon": 0.0},
//!   "model": {"n_latent": 4, "embed_dim": 8, "rff_dim": 256, "hidden": [64,64],
//!             "steps": 2000, "batch": 64, "lr": 0.001, "negatives": 0,
//!             "joint_phi": false, "finetune_decoder": false},
//!   "eval":  {"episodes": 10, "eval_seeds": 4, "max_steps": 100},
//!   "seed": 0,
//!   "out": "runs/demo"
//! }
//! ```
//!
//! The alternative environment is `{"point-mass": {"action_dim": 8, "dt": 0.1,
//! "noise_std": 0.01, "bound": 1.0, "gamma": 0.95, "target": [0.8, 0.8]}}`.
//! Unknown keys anywhere are rejected. `negatives: 0` means in-batch
//! negatives; a positive count samples that many from the candidate pool.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::GridSpec;
use crate::{Error, Result};

/// Which environment a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvSpec {
    Gridworld(GridSpec),
    PointMass(PointMassSpec),
}

/// Parameters for the continuous point-mass environment; the mixing matrix
/// itself is derived from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMassSpec {
    pub action_dim: usize,
    pub dt: f64,
    pub noise_std: f64,
    pub bound: f64,
    pub gamma: f64,
    /// Cell the scripted expert steers toward.
    pub target: [f64; 2],
}

/// Which pipeline fits the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TrailEbm,
    TrailLinear,
    TrailTabular,
    Bc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TrailEbm => "trail-ebm",
            Method::TrailLinear => "trail-linear",
            Method::TrailTabular => "trail-tabular",
            Method::Bc => "bc",
        }
    }
}

/// Dataset sizes: `m` offline triples, `n` expert pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub m: usize,
    pub n: usize,
    /// Mix this much uniform noise into the expert before demonstrating.
    pub expert_epsilon: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { m: 10_000, n: 50, expert_epsilon: 0.0 }
    }
}

/// Model hyperparameters shared by the training stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Latent-action count for the tabular pipeline.
    pub n_latent: usize,
    pub embed_dim: usize,
    pub rff_dim: usize,
    pub hidden: Vec<usize>,
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// 0 = in-batch negatives, k > 0 = k pool samples per step.
    pub negatives: usize,
    /// Let decoder gradients flow into the embedding during pretraining.
    pub joint_phi: bool,
    /// Refit the decoder on expert data after latent cloning.
    pub finetune_decoder: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_latent: 4,
            embed_dim: 8,
            rff_dim: 256,
            hidden: vec![64, 64],
            steps: 2000,
            batch: 64,
            lr: 1e-3,
            negatives: 0,
            joint_phi: false,
            finetune_decoder: false,
        }
    }
}

/// Evaluation protocol: `eval_seeds` independent runs of `episodes` rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub episodes: usize,
    pub eval_seeds: usize,
    pub max_steps: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { episodes: 10, eval_seeds: 4, max_steps: 100 }
    }
}

/// One experiment, fully specified. Hash it with [`config_hash`] for
/// manifests; every derived artifact is a function of this struct alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvSpec,
    pub method: Method,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("runs/out")
}

/// Flag-level overrides layered on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub embed_dim: Option<usize>,
    pub rff_dim: Option<usize>,
    pub negatives: Option<usize>,
    pub steps: Option<usize>,
    pub lr: Option<f64>,
    pub batch: Option<usize>,
    pub seed: Option<u64>,
    pub joint_phi: Option<bool>,
    pub finetune_decoder: Option<bool>,
    pub episodes: Option<usize>,
    pub eval_seeds: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Read, parse, validate. Parse errors surface the offending key or
    /// line; validation errors name the field.
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Config {
            field: path.display().to_string(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.embed_dim {
            self.model.embed_dim = v;
        }
        if let Some(v) = o.rff_dim {
            self.model.rff_dim = v;
        }
        if let Some(v) = o.negatives {
            self.model.negatives = v;
        }
        if let Some(v) = o.steps {
            self.model.steps = v;
        }
        if let Some(v) = o.lr {
            self.model.lr = v;
        }
        if let Some(v) = o.batch {
            self.model.batch = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.joint_phi {
            self.model.joint_phi = v;
        }
        if let Some(v) = o.finetune_decoder {
            self.model.finetune_decoder = v;
        }
        if let Some(v) = o.episodes {
            self.eval.episodes = v;
        }
        if let Some(v) = o.eval_seeds {
            self.eval.eval_seeds = v;
        }
        if let Some(ref v) = o.out {
            self.out = v.clone();
        }
    }

    /// Check every field before any work happens.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config { field: field.into(), msg });
        match &self.environment {
            EnvSpec::Gridworld(spec) => spec.validate()?,
            EnvSpec::PointMass(pm) => {
                if pm.action_dim < 2 {
                    return bad(
                        "environment.action_dim",
                        format!("need at least 2 control dimensions, got {}", pm.action_dim),
                    );
                }
                if !(pm.dt > 0.0) || !(pm.bound > 0.0) || pm.noise_std < 0.0 {
                    return bad(
                        "environment.dt/bound/noise_std",
                        "dt and bound must be positive, noise_std non-negative".into(),
                    );
                }
                if !(0.0..1.0).contains(&pm.gamma) {
                    return bad(
                        "environment.gamma",
                        format!("discount must lie in [0, 1), got {}", pm.gamma),
                    );
                }
                if matches!(self.method, Method::TrailTabular) {
                    return bad(
                        "method",
                        "trail-tabular needs a finite state space; use the gridworld".into(),
                    );
                }
            }
        }
        if self.data.m == 0 {
            return bad("data.m", "offline dataset size must be at least 1".into());
        }
        if self.data.n == 0 {
            return bad("data.n", "expert dataset size must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.data.expert_epsilon) {
            return bad(
                "data.expert_epsilon",
                format!("must lie in [0, 1), got {}", self.data.expert_epsilon),
            );
        }
        let m = &self.model;
        if m.n_latent == 0 {
            return bad("model.n_latent", "latent count must be at least 1".into());
        }
        if m.embed_dim == 0 {
            return bad("model.embed_dim", "embedding width must be at least 1".into());
        }
        if m.rff_dim == 0 {
            return bad("model.rff_dim", "feature count must be at least 1".into());
        }
        if m.hidden.iter().any(|&h| h == 0) {
            return bad("model.hidden", "hidden widths must be positive".into());
        }
        if m.steps == 0 {
            return bad("model.steps", "training needs at least 1 step".into());
        }
        if m.batch == 0 {
            return bad("model.batch", "batch size must be at least 1".into());
        }
        if !(m.lr > 0.0) || !m.lr.is_finite() {
            return bad("model.lr", format!("learning rate must be positive, got {}", m.lr));
        }
        if self.eval.episodes == 0 {
            return bad("eval.episodes", "evaluation needs at least 1 episode".into());
        }
        if self.eval.eval_seeds == 0 {
            return bad("eval.eval_seeds", "evaluation needs at least 1 seed".into());
        }
        if self.eval.max_steps == 0 {
            return bad("eval.max_steps", "episodes need at least 1 step".into());
        }
        Ok(())
    }

    /// Discount of the configured environment.
    pub fn gamma(&self) -> f64 {
        match &self.environment {
            EnvSpec::Gridworld(spec) => spec.gamma,
            EnvSpec::PointMass(pm) => pm.gamma,
        }
    }
}

/// SHA-256 of the canonical JSON serialization, hex-encoded. Field order is
/// declaration order, so the hash is stable across runs and platforms.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(json.as_bytes());
    format!("{:x}", hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> ExperimentConfig {
        ExperimentConfig {
            environment: EnvSpec::Gridworld(GridSpec::default_5x5()),
            method: Method::TrailTabular,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            eval: EvalConfig::default(),
            seed: 0,
            out: PathBuf::from("runs/demo"),
        }
    }

    #[test]
    fn round_trips_and_hashes_stably() {
        let cfg = demo();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(config_hash(&cfg), config_hash(&back));
        let mut other = cfg.clone();
        other.seed = 1;
        assert_ne!(config_hash(&cfg), config_hash(&other));
    }

    #[test]
    fn unknown_keys_are_rejected_at_any_depth() {
        let mut v = serde_json::to_value(demo()).unwrap();
        v["banana"] = 1.into();
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
        let mut v = serde_json::to_value(demo()).unwrap();
        v["environment"]["gridworld"]["banana"] = 1.into();
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
        let mut v = serde_json::to_value(demo()).unwrap();
        v["model"]["banana"] = 1.into();
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
    }

    #[test]
    fn defaults_fill_missing_sections() {
        let json = r#"{
            "environment": {"gridworld": {"width": 3, "height": 3, "goal": [2, 2],
                            "slip_prob": 0.1, "duplication": {"balanced": 4},
                            "gamma": 0.95}},
            "method": "bc"
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.data.m, 10_000);
        assert_eq!(cfg.eval.episodes, 10);
        assert_eq!(cfg.eval.eval_seeds, 4);
        assert_eq!(cfg.out, PathBuf::from("runs/out"));
        cfg.validate().unwrap();
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = demo();
        cfg.data.m = 0;
        match cfg.validate() {
            Err(Error::Config { field, .. }) => assert_eq!(field, "data.m"),
            other => panic!("expected a config error, got {other:?}"),
        }
        let mut cfg = demo();
        cfg.model.lr = -1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config { ref field, .. }) if field == "model.lr"));
    }

    #[test]
    fn tabular_method_rejects_the_continuous_env() {
        let mut cfg = demo();
        cfg.environment = EnvSpec::PointMass(PointMassSpec {
            action_dim: 8,
            dt: 0.1,
            noise_std: 0.01,
            bound: 1.0,
            gamma: 0.95,
            target: [0.8, 0.8],
        });
        assert!(matches!(cfg.validate(), Err(Error::Config { ref field, .. }) if field == "method"));
        cfg.method = Method::Bc;
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_layer_on_top() {
        let mut cfg = demo();
        let o = Overrides {
            steps: Some(7),
            lr: Some(0.5),
            joint_phi: Some(true),
            out: Some(PathBuf::from("elsewhere")),
            ..Overrides::default()
        };
        cfg.apply(&o);
        assert_eq!(cfg.model.steps, 7);
        assert_eq!(cfg.model.lr, 0.5);
        assert!(cfg.model.joint_phi);
        assert_eq!(cfg.out, PathBuf::from("elsewhere"));
        assert_eq!(cfg.model.batch, 64);
    }
}
