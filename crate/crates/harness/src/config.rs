//! Experiment configuration files.
//!
//! A config is a JSON object; every field except `data` has a default. See
//! the README for the full schema.

use std::path::{Path, PathBuf};

use acfair::data::{CausalModelSpec, DatasetSchema, Gmm4Params, DEFAULT_TEST_FRACTION};
use acfair::models::{GbtParams, LogregParams, SvmParams};
use acfair::strategies::StrategyConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Where the rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, schema: SchemaRef },
    Gmm4 { params: Gmm4Params },
    /// `n` rows drawn from a finite causal model with one-hot features.
    Causal { spec: CausalModelSpec, n: usize },
}

/// Inline schema object or a path to a schema JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaRef {
    Inline(DatasetSchema),
    Path(PathBuf),
}

/// The learner the firm runs on the (possibly relabeled) training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FirmSpec {
    Gbt(GbtParams),
    Logreg(LogregParams),
    Svm(SvmParams),
}

impl Default for FirmSpec {
    fn default() -> Self {
        FirmSpec::Gbt(GbtParams::default())
    }
}

/// Budget value in a sweep; `null` in JSON is unlimited.
pub type BudgetValue = Option<usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    None,
    Budget(Vec<BudgetValue>),
    Alpha(Vec<f64>),
    Knowledge(Vec<f64>),
}

pub const DEFAULT_BUDGETS: [usize; 6] = [0, 5, 10, 20, 40, 80];
pub const DEFAULT_ALPHAS: [f64; 5] = [0.05, 0.1, 0.3, 0.6, 0.9];
pub const DEFAULT_KNOWLEDGE: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 1.0];

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::Budget(_) => "budget",
            SweepAxis::Alpha(_) => "alpha",
            SweepAxis::Knowledge(_) => "knowledge",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepAxis::None => 1,
            SweepAxis::Budget(v) => v.len(),
            SweepAxis::Alpha(v) | SweepAxis::Knowledge(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn default_budgets() -> Self {
        SweepAxis::Budget(DEFAULT_BUDGETS.iter().map(|&b| Some(b)).collect())
    }

    pub fn default_alphas() -> Self {
        SweepAxis::Alpha(DEFAULT_ALPHAS.to_vec())
    }

    pub fn default_knowledge() -> Self {
        SweepAxis::Knowledge(DEFAULT_KNOWLEDGE.to_vec())
    }

    /// Points of the sweep in configuration order.
    pub fn points(&self, base: &StrategyConfig) -> Vec<SweepPoint> {
        match self {
            SweepAxis::None => vec![SweepPoint {
                index: 0,
                label: "none".into(),
                order_key: 0.0,
                strategy: base.clone(),
            }],
            SweepAxis::Budget(values) => values
                .iter()
                .enumerate()
                .map(|(index, &b)| SweepPoint {
                    index,
                    label: budget_label(b),
                    order_key: b.map_or(f64::INFINITY, |v| v as f64),
                    strategy: StrategyConfig { budget: b, ..base.clone() },
                })
                .collect(),
            SweepAxis::Alpha(values) => values
                .iter()
                .enumerate()
                .map(|(index, &alpha)| SweepPoint {
                    index,
                    label: format_value(alpha),
                    order_key: alpha,
                    strategy: StrategyConfig { alpha, ..base.clone() },
                })
                .collect(),
            SweepAxis::Knowledge(values) => values
                .iter()
                .enumerate()
                .map(|(index, &knowledge_fraction)| SweepPoint {
                    index,
                    label: format_value(knowledge_fraction),
                    order_key: knowledge_fraction,
                    strategy: StrategyConfig { knowledge_fraction, ..base.clone() },
                })
                .collect(),
        }
    }
}

pub fn budget_label(b: BudgetValue) -> String {
    b.map_or_else(|| "unlimited".to_string(), |v| v.to_string())
}

/// Shortest round-tripping decimal form.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

/// One value of the sweep axis with the strategy it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub label: String,
    /// Numeric position used for the canonical row order.
    pub order_key: f64,
    pub strategy: StrategyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct OutputConfig {
    /// Directory for results; `--out` overrides it.
    pub dir: Option<PathBuf>,
    /// Fill the `wall_ms` column. Off by default so that re-runs produce
    /// byte-identical CSVs; timings always go to the JSON sidecar.
    pub record_wall_ms: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub firm: FirmSpec,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub sweep: SweepAxis,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Master seed; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_repetitions() -> usize {
    10
}

fn default_test_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}

impl ExperimentConfig {
    pub fn new(data: DataSource) -> Self {
        Self {
            data,
            firm: FirmSpec::default(),
            strategy: StrategyConfig::default(),
            sweep: SweepAxis::None,
            repetitions: default_repetitions(),
            seed: 0,
            test_fraction: default_test_fraction(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a config file. Relative data and schema paths are resolved
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DataSource::Csv { path: csv, schema } = &mut cfg.data {
            if csv.is_relative() {
                *csv = base.join(&*csv);
            }
            if let SchemaRef::Path(p) = schema {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(HarnessError::Config("repetitions must be at least 1".into()));
        }
        if self.sweep.is_empty() {
            return Err(HarnessError::Config(format!("{} sweep list is empty", self.sweep.name())));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(HarnessError::Config(format!("test_fraction {} outside (0, 1)", self.test_fraction)));
        }
        for point in self.sweep.points(&self.strategy) {
            point
                .strategy
                .validate()
                .map_err(|e| HarnessError::Config(format!("sweep value {}: {e}", point.label)))?;
        }
        match &self.data {
            DataSource::Gmm4 { params } => params.validate()?,
            DataSource::Causal { spec, n } => {
                spec.validate()?;
                if *n < 2 {
                    return Err(HarnessError::Config("causal source needs n >= 2".into()));
                }
            }
            DataSource::Csv { .. } => {}
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form, with
    /// the master seed and output settings left out.
    pub fn hash(&self) -> String {
        let canonical = Self {
            seed: 0,
            output: OutputConfig::default(),
            ..self.clone()
        };
        let text = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
