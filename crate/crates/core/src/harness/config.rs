//! Experiment configuration.
//!
//! A config file is flat TOML: scalar keys plus the `initial_labels` list.
//! Every key has a default, so an empty file (or none, with `--preset`) is
//! valid. Precedence, lowest first: file, preset, `ZURN_SEED` (seed only),
//! command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::urn::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    ADistribution,
    MomentsCheck,
    LimitCheck,
    FixedPoint,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::ADistribution => "a-distribution",
            Mode::MomentsCheck => "moments-check",
            Mode::LimitCheck => "limit-check",
            Mode::FixedPoint => "fixed-point",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `{−1, 1}`, 4998 additions, one realization.
    Fig1,
    /// `{−1, 1}`, 4998 additions, 5000 realizations.
    Fig2a,
    /// `{1, 1}`, 4998 additions, 5000 realizations.
    Fig2b,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2a" => Ok(Preset::Fig2a),
            "fig2b" => Ok(Preset::Fig2b),
            other => Err(format!(
                "unknown preset `{other}` (expected fig1, fig2a or fig2b)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub initial_labels: Vec<Vec<i64>>,
    /// Inferred from `initial_labels` when absent.
    pub d: Option<usize>,
    pub k: usize,
    pub additions: usize,
    pub realizations: usize,
    pub seed: u64,
    pub checkpoints: Vec<usize>,
    pub output_dir: PathBuf,
    pub bigint: bool,
    /// Worker threads; 0 uses all cores. Outputs do not depend on it.
    pub threads: usize,

    pub z_max: f64,
    pub a_mean_z_max: f64,
    pub ks_quenched_max: f64,
    pub ks_pooled_max: f64,
    pub coupling_max: f64,
    pub coupling_window: usize,
    pub min_abs_a: f64,
    pub min_limit_n: usize,

    pub pool_size: usize,
    /// Larger than `pool_size`: the pool mean drifts as a neutral random walk,
    /// which inflates the KS statistic of small pools.
    pub stationarity_pool_size: usize,
    pub stationarity_trials: usize,
    pub stationarity_iterations: usize,
    pub stationarity_reference_size: usize,
    pub stationarity_alpha: f64,
    pub stationarity_min_pass_rate: f64,
    pub exp_iterations: usize,
    pub exp_floor_replicates: usize,
    pub exp_floor_factor: f64,
    pub contraction_iterations: usize,
    pub contraction_min_ratio: f64,
    pub contraction_max_ratio: f64,
    pub k3_iterations: usize,
    pub k3_alpha: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: None,
            initial_labels: vec![vec![-1], vec![1]],
            d: None,
            k: 2,
            additions: 4998,
            realizations: 1,
            seed: 1,
            checkpoints: Vec::new(),
            output_dir: PathBuf::from("zurn-out"),
            bigint: false,
            threads: 0,

            z_max: 4.0,
            a_mean_z_max: 3.0,
            ks_quenched_max: 0.05,
            ks_pooled_max: 0.03,
            coupling_max: 0.1,
            coupling_window: 500,
            min_abs_a: 1e-6,
            min_limit_n: 1000,

            pool_size: 100_000,
            stationarity_pool_size: 1_000_000,
            stationarity_trials: 100,
            stationarity_iterations: 5,
            stationarity_reference_size: 10_000,
            stationarity_alpha: 0.01,
            stationarity_min_pass_rate: 0.95,
            exp_iterations: 30,
            exp_floor_replicates: 8,
            exp_floor_factor: 2.0,
            contraction_iterations: 10,
            contraction_min_ratio: 0.55,
            contraction_max_ratio: 0.78,
            k3_iterations: 30,
            k3_alpha: 0.01,
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
    pub additions: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        let (labels, m) = match preset {
            Preset::Fig1 => (vec![vec![-1], vec![1]], 1),
            Preset::Fig2a => (vec![vec![-1], vec![1]], 5000),
            Preset::Fig2b => (vec![vec![1], vec![1]], 5000),
        };
        self.initial_labels = labels;
        self.d = Some(1);
        self.additions = 4998;
        self.realizations = m;
        self.checkpoints.clear();
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = o.preset {
            self.apply_preset(p);
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(m) = o.realizations {
            self.realizations = m;
        }
        if let Some(n) = o.additions {
            self.additions = n;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
    }

    pub fn dim(&self) -> usize {
        self.d
            .or_else(|| self.initial_labels.first().map(Vec::len))
            .unwrap_or(0)
    }

    pub fn tau0(&self) -> usize {
        self.initial_labels.len()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.initial_labels.iter().cloned().map(Label).collect()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.initial_labels.is_empty() {
            return bad("initial_labels must not be empty".into());
        }
        let d = self.dim();
        if d == 0 {
            return bad("dimension must be at least 1".into());
        }
        if let Some(i) = self.initial_labels.iter().position(|l| l.len() != d) {
            return bad(format!("initial label {i} does not have {d} coordinates"));
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2, got {}", self.k));
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        let (lo, hi) = (self.tau0(), self.tau0() + self.additions);
        let mut prev = lo;
        for &c in &self.checkpoints {
            if c <= prev || c > hi {
                return bad(format!(
                    "checkpoints must be strictly increasing within ({lo}, {hi}], found {c}"
                ));
            }
            prev = c;
        }
        Ok(())
    }
}
