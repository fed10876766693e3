//! Experiment configuration, its content hash, and per-replication RNG
//! streams.
//!
//! A config file is a JSON object whose fields override the defaults of the
//! chosen subcommand; unknown fields are rejected.

use std::path::Path;

use pricing_core::demand::LogisticConfig;
use pricing_core::policy::{SelectCConfig, TrainConfig};
use pricing_core::synthgen::{GenConfig, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub iters: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { lr: 0.05, iters: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label written to the `experiment` column.
    pub experiment: String,
    /// Sample size for `gen` and `sales-regime`.
    pub n: usize,
    pub d: usize,
    pub ladder: Vec<f64>,
    pub unit_cost: f64,
    pub lambda: f64,
    pub variant: Variant,
    /// Blended-demand qualities to sweep.
    pub alpha_grid: Vec<f64>,
    /// Also run with a T-learner fitted on the logged data.
    pub fitted_demand: bool,
    pub n_grid: Vec<usize>,
    /// Logit shift for sweeps; `sales-regime` uses `shift_grid` instead.
    pub shift: f64,
    pub shift_grid: Vec<f64>,
    /// Replications for evaluation experiments and for `learn-sweep`.
    pub reps: usize,
    /// Replications for the learning half of `sales-regime`.
    pub learn_reps: usize,
    pub seed: u64,
    pub estimators: Vec<String>,
    pub train: TrainSection,
    pub cv_folds: usize,
    /// Fully labelled customers used to fit the evaluation target policy.
    pub target_train_size: usize,
    /// Fresh customers on which learned policies are scored.
    pub test_size: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: "custom".into(),
            n: 500,
            d: 10,
            ladder: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            unit_cost: 0.0,
            lambda: 5.0,
            variant: Variant::Base,
            alpha_grid: Vec::new(),
            fitted_demand: true,
            n_grid: vec![50, 100, 500, 2000],
            shift: 0.0,
            shift_grid: vec![-10.0, 0.0, 10.0],
            reps: 500,
            learn_reps: 20,
            seed: 0,
            estimators: ["ips", "mv", "robust", "cmix"].map(String::from).to_vec(),
            train: TrainSection::default(),
            cv_folds: 5,
            target_train_size: 100,
            test_size: 10_000,
        }
    }
}

/// Subcommands that run experiments, each with its own defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    OracleCheck,
    EvalSweep,
    LearnSweep,
    SalesRegime,
    EvalCsv,
    Gen,
}

impl Preset {
    pub fn defaults(self) -> ExperimentConfig {
        let base = ExperimentConfig::default();
        match self {
            Preset::OracleCheck => ExperimentConfig {
                experiment: "oracle-check".into(),
                ..base
            },
            Preset::EvalSweep => ExperimentConfig {
                experiment: "eval-sweep".into(),
                ..base
            },
            Preset::LearnSweep => ExperimentConfig {
                experiment: "learn-sweep".into(),
                reps: 20,
                ..base
            },
            Preset::SalesRegime => ExperimentConfig {
                experiment: "sales-regime".into(),
                estimators: vec!["ips".into(), "robust".into()],
                ..base
            },
            Preset::EvalCsv => ExperimentConfig {
                experiment: "eval-csv".into(),
                estimators: ["ips", "robust", "mv", "cmix"].map(String::from).to_vec(),
                ..base
            },
            Preset::Gen => ExperimentConfig {
                experiment: "gen".into(),
                n: 1000,
                ..base
            },
        }
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

impl ExperimentConfig {
    /// Applies the JSON document `text` on top of `preset`'s defaults.
    pub fn from_json(preset: Preset, text: &str) -> Result<Self> {
        let patch: serde_json::Value =
            serde_json::from_str(text).map_err(|e| BenchError::Config(format!("invalid JSON: {e}")))?;
        if !patch.is_object() {
            return Err(BenchError::Config("config must be a JSON object".into()));
        }
        let mut value = serde_json::to_value(preset.defaults())?;
        merge(&mut value, patch);
        let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(preset: Preset, path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::from_json(preset, &text)
            }
            None => Ok(preset.defaults()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.ladder.is_empty() {
            return bad("ladder must contain at least one price".into());
        }
        if self.d < self.variant.min_dim() {
            return bad(format!("d = {} too small for variant {}", self.d, self.variant.name()));
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("alpha {a} outside [0, 1]"));
        }
        if self.n_grid.contains(&0) || self.n == 0 {
            return bad("sample sizes must be positive".into());
        }
        if self.cv_folds < 2 {
            return bad(format!("cv_folds = {} must be at least 2", self.cv_folds));
        }
        if self.train.iters == 0 || !(self.train.lr > 0.0) {
            return bad("train.lr must be positive and train.iters nonzero".into());
        }
        if self.target_train_size == 0 || self.test_size == 0 {
            return bad("target_train_size and test_size must be positive".into());
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
    }

    pub fn gen_config(&self, shift: f64) -> GenConfig {
        GenConfig {
            n: self.n,
            d: self.d,
            ladder: self.ladder.clone(),
            unit_cost: self.unit_cost,
            lambda: self.lambda,
            variant: self.variant,
            logit_shift: shift,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.train.lr,
            max_iters: self.train.iters,
            ..TrainConfig::default()
        }
    }

    pub fn logistic_config(&self) -> LogisticConfig {
        LogisticConfig::default()
    }

    pub fn select_c_config(&self, seed: u64) -> SelectCConfig {
        SelectCConfig {
            folds: self.cv_folds,
            seed,
            ..SelectCConfig::default()
        }
    }
}

/// Seed for the stream identified by `labels` under base seed `base`.
/// Streams depend only on their labels, so replications can run in any
/// order.
pub fn stream_seed(base: u64, labels: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for l in labels {
        h.update(l.to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn stream_rng(base: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(base, labels))
}
