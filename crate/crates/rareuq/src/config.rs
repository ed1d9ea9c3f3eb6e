//! Experiment configuration: desk-scale defaults per experiment, strict JSON
//! overrides, and the paper-scale switch.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "table1")]
    Table1,
    #[serde(rename = "table2")]
    Table2,
    #[serde(rename = "av-demo", alias = "figures")]
    AvDemo,
    #[serde(rename = "var-check")]
    VarCheck,
}

impl ExperimentId {
    pub fn label(&self) -> &'static str {
        match self {
            ExperimentId::Table1 => "table1",
            ExperimentId::Table2 => "table2",
            ExperimentId::AvDemo => "av-demo",
            ExperimentId::VarCheck => "var-check",
        }
    }
}

/// Full settings for one experiment run. Construct with the per-experiment
/// desk defaults, then layer JSON overrides on top; serialization always
/// emits every field, so parse -> serialize -> parse is the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    pub meta_reps: usize,
    pub k_list: Vec<usize>,
    pub replicate_count: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub schemes: Vec<BootstrapKind>,
    pub output_dir: PathBuf,
}

/// Partial form accepted from `--config` files: any subset of keys, unknown
/// keys rejected.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub experiment: Option<ExperimentId>,
    pub seed: Option<u64>,
    pub meta_reps: Option<usize>,
    pub k_list: Option<Vec<usize>>,
    pub replicate_count: Option<usize>,
    pub batch_size: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub schemes: Option<Vec<BootstrapKind>>,
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Desk-scale defaults: small enough to finish in minutes on a laptop.
    pub fn desk_defaults(experiment: ExperimentId, seed: u64) -> Self {
        let base = Self {
            experiment,
            seed,
            meta_reps: 1000,
            k_list: vec![10, 20, 100],
            replicate_count: 1000,
            batch_size: 10_000,
            alpha: 0.05,
            beta: 5.0,
            schemes: BootstrapKind::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
        };
        match experiment {
            ExperimentId::Table1 => base,
            ExperimentId::Table2 => Self {
                meta_reps: 2000,
                k_list: vec![100, 1000],
                replicate_count: 500,
                schemes: vec![BootstrapKind::Parametric],
                ..base
            },
            ExperimentId::AvDemo => Self {
                meta_reps: 1,
                k_list: vec![crate::lane_change::DEFAULT_DATASET_ROWS],
                replicate_count: 500,
                batch_size: 100_000,
                schemes: vec![BootstrapKind::Parametric],
                ..base
            },
            ExperimentId::VarCheck => Self {
                meta_reps: 2000,
                k_list: vec![100],
                replicate_count: 2,
                batch_size: 2000,
                beta: 2.0,
                schemes: vec![BootstrapKind::Parametric],
                ..base
            },
        }
    }

    /// Restores the publication-scale settings where they differ from the
    /// desk defaults (currently the second coverage study only).
    pub fn apply_paper_scale(&mut self) {
        if self.experiment == ExperimentId::Table2 {
            self.meta_reps = 10_000;
            self.replicate_count = 1000;
            self.batch_size = 10_000;
        }
    }

    /// Layers a raw override document over this configuration. The document
    /// may not switch experiments.
    pub fn apply_overrides(&mut self, overrides: ConfigOverrides) -> Result<()> {
        if let Some(experiment) = overrides.experiment {
            if experiment != self.experiment {
                return Err(Error::Config(format!(
                    "config file is for {} but the {} experiment was requested",
                    experiment.label(),
                    self.experiment.label()
                )));
            }
        }
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(meta_reps) = overrides.meta_reps {
            self.meta_reps = meta_reps;
        }
        if let Some(k_list) = overrides.k_list {
            self.k_list = k_list;
        }
        if let Some(replicate_count) = overrides.replicate_count {
            self.replicate_count = replicate_count;
        }
        if let Some(batch_size) = overrides.batch_size {
            self.batch_size = batch_size;
        }
        if let Some(alpha) = overrides.alpha {
            self.alpha = alpha;
        }
        if let Some(beta) = overrides.beta {
            self.beta = beta;
        }
        if let Some(schemes) = overrides.schemes {
            self.schemes = schemes;
        }
        if let Some(output_dir) = overrides.output_dir {
            self.output_dir = output_dir;
        }
        self.validate()
    }

    pub fn parse_overrides(text: &str) -> Result<ConfigOverrides> {
        let overrides: ConfigOverrides =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(overrides)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hash of the canonical serialized form, recorded in run metadata.
    pub fn content_hash(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(self)?.as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        Ok(hex)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be finite, got {}", self.beta)));
        }
        if self.meta_reps == 0 {
            return Err(Error::Config("meta_reps must be >= 1".into()));
        }
        if self.replicate_count == 0 {
            return Err(Error::Config("replicate_count must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.k_list.is_empty() {
            return Err(Error::Config("k_list must not be empty".into()));
        }
        if self.k_list.contains(&0) {
            return Err(Error::Config("every k must be >= 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("schemes must not be empty".into()));
        }
        Ok(())
    }
}

// ---- tests -----------------------------------------------------------------
