use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::environment::NoiseModel;
use crate::error::{Error, Result};
use crate::policies::{plan_layers, ConstantMode, Exponents};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeShape {
    pub depth: usize,
    pub breadth: usize,
}

/// Which rounds end up in the CSVs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Logging {
    /// Every round up to this one is logged.
    pub dense_until: u64,
    /// Log-spaced rounds between `dense_until` and the horizon.
    pub geometric_points: usize,
}

impl Default for Logging {
    fn default() -> Self {
        Self {
            dense_until: 1000,
            geometric_points: 100,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// One multi-seed experiment, read from JSON. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tree: TreeShape,
    pub arms: usize,
    pub horizon: u64,
    #[serde(default)]
    pub noise: NoiseModel,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub constants: ConstantMode,
    #[serde(default)]
    pub logging: Logging,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Sample one environment from the first seed and reuse it for every seed.
    #[serde(default)]
    pub shared_environment: bool,
    /// Exponents replacing the defaults, keyed by depth.
    #[serde(default)]
    pub exponent_overrides: BTreeMap<usize, Exponents>,
    /// Write a per-round trace next to each seed's CSV.
    #[serde(default)]
    pub trace: bool,
}

const DESK: &str = include_str!("../../../../presets/desk.json");
const PAPER_FIG2: &str = include_str!("../../../../presets/paper-fig2.json");

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Built-in configs: `desk` and `paper-fig2`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Self::from_json(DESK),
            "paper-fig2" => Self::from_json(PAPER_FIG2),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected desk or paper-fig2)"
            ))),
        }
    }

    /// Replaces the seed list by `0..n`.
    pub fn with_seed_count(mut self, n: u64) -> Self {
        self.seeds = (0..n).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.tree.depth == 0 || self.tree.breadth == 0 {
            return fail(format!(
                "tree depth and breadth must be >= 1, got {:?}",
                self.tree
            ));
        }
        if self.arms < 2 {
            return fail(format!("arms must be >= 2, got {}", self.arms));
        }
        if self.horizon < 2 {
            return fail(format!("horizon must be >= 2, got {}", self.horizon));
        }
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if let ConstantMode::Scaled { c_scale } = self.constants {
            if !(c_scale > 0.0 && c_scale.is_finite()) {
                return fail(format!("c_scale must be > 0, got {c_scale}"));
            }
        }
        self.noise
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        plan_layers(
            self.tree.depth,
            self.tree.breadth,
            self.arms,
            self.horizon,
            self.constants,
            &self.exponent_overrides,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}
