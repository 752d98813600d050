//! One experiment cell: sample or load, split, plan on the training split,
//! train the firm's model, evaluate on the untouched test split.

use std::time::Instant;

use acfair::data::{counterfactual_gmm4, load_csv, split_indices, DatasetSchema, Gmm4Params, TabularDataset, MINORITY};
use acfair::metrics::{success, FairnessReport};
use acfair::models::{train_gbt, train_linear_svm, train_logreg, Classifier, FirmModel};
use acfair::rng::{derive_seed, stream};
use acfair::strategies::{apply_plan, plan, FlipPlan, StrategyConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{DataSource, ExperimentConfig, FirmSpec, SchemaRef, SweepPoint};
use crate::error::{HarnessError, Result};

/// Tag mixed with the sweep index to derive a cell's strategy seed.
const CELL_STREAM: u64 = 0x100;

/// Seed of repetition `rep`; data, split and firm model all derive from it,
/// so every sweep value of one repetition sees the same data.
pub fn repetition_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, rep as u64)
}

/// Seed of the collective's planner in one cell.
pub fn cell_seed(rep_seed: u64, sweep_index: usize) -> u64 {
    derive_seed(rep_seed, CELL_STREAM + sweep_index as u64)
}

/// Data loaded once per run. CSV files are read here; synthetic sources are
/// sampled per repetition.
#[derive(Debug, Clone)]
pub enum LoadedSource {
    Table(TabularDataset),
    Gmm4(Gmm4Params),
    Causal { spec: acfair::data::CausalModelSpec, n: usize },
}

impl LoadedSource {
    pub fn load(source: &DataSource) -> Result<Self> {
        Ok(match source {
            DataSource::Csv { path, schema } => {
                let schema = match schema {
                    SchemaRef::Inline(s) => s.clone(),
                    SchemaRef::Path(p) => DatasetSchema::from_path(p)?,
                };
                LoadedSource::Table(load_csv(path, &schema)?)
            }
            DataSource::Gmm4 { params } => LoadedSource::Gmm4(params.clone()),
            DataSource::Causal { spec, n } => LoadedSource::Causal { spec: spec.clone(), n: *n },
        })
    }

    /// Full dataset for a repetition, with the majority counterfactual of
    /// every row when the source defines one.
    pub fn materialize(&self, rep_seed: u64) -> Result<(TabularDataset, Option<Vec<f64>>)> {
        let sample_seed = derive_seed(rep_seed, stream::SAMPLE);
        Ok(match self {
            LoadedSource::Table(t) => (t.clone(), None),
            LoadedSource::Gmm4(params) => {
                let data = acfair::data::sample_gmm4(params, sample_seed)?;
                let mut cf = Vec::with_capacity(data.features().len());
                for i in 0..data.len() {
                    if data.attribute()[i] == MINORITY {
                        cf.extend(counterfactual_gmm4(data.row(i), data.labels()[i], params)?);
                    } else {
                        cf.extend_from_slice(data.row(i));
                    }
                }
                (data, Some(cf))
            }
            LoadedSource::Causal { spec, n } => {
                let (data, cf) = spec.sample(*n, sample_seed)?;
                (data, Some(cf))
            }
        })
    }
}

/// Train and test splits of one repetition.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: TabularDataset,
    pub test: TabularDataset,
    /// Counterfactual features of the test rows, row-major.
    pub test_counterfactual: Option<Vec<f64>>,
}

pub fn prepare(source: &LoadedSource, rep_seed: u64, test_fraction: f64) -> Result<Prepared> {
    let (data, cf) = source.materialize(rep_seed)?;
    let (train_idx, test_idx) = split_indices(data.len(), test_fraction, derive_seed(rep_seed, stream::SPLIT))?;
    let d = data.n_features();
    let test_counterfactual = cf.map(|cf| {
        test_idx
            .iter()
            .flat_map(|&i| cf[i * d..(i + 1) * d].iter().copied())
            .collect()
    });
    Ok(Prepared {
        train: data.select(&train_idx)?,
        test: data.select(&test_idx)?,
        test_counterfactual,
    })
}

/// SHA-256 over the features, labels and attribute bytes.
pub fn dataset_sha256(data: &TabularDataset) -> String {
    let mut h = Sha256::new();
    for v in data.features() {
        h.update(v.to_le_bytes());
    }
    h.update(data.labels());
    h.update(data.attribute());
    hex::encode(h.finalize())
}

pub fn train_firm(spec: &FirmSpec, data: &TabularDataset, seed: u64) -> acfair::Result<FirmModel> {
    Ok(match spec {
        FirmSpec::Gbt(p) => FirmModel::Gbt(train_gbt(data, p, seed)?),
        FirmSpec::Logreg(p) => FirmModel::Linear(train_logreg(data, p, seed)?),
        FirmSpec::Svm(p) => FirmModel::Linear(train_linear_svm(data, p)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub sweep_axis: String,
    pub sweep_value: String,
    pub seed: u64,
    pub error: f64,
    pub sp: f64,
    pub eqod: f64,
    /// Agreement of the firm's model on test rows and their counterfactuals.
    pub success: Option<f64>,
    pub budget_used: usize,
    pub wall_ms: f64,
    /// Digest of the test split, taken before planning and checked after
    /// evaluation.
    pub test_sha256: String,
}

/// What the collective does in a cell; `None` is the no-action baseline.
pub type Action<'a> = Option<&'a SweepPoint>;

/// Run one cell on already prepared splits.
pub fn run_prepared(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    action: Action<'_>,
    rep_seed: u64,
) -> Result<ExperimentResult> {
    let start = Instant::now();
    let label = action.map_or_else(|| "baseline".to_string(), |p| p.label.clone());
    let annotate = |source: acfair::Error| HarnessError::Cell {
        value: label.clone(),
        seed: rep_seed,
        source,
    };
    let test_sha256 = dataset_sha256(&prepared.test);
    let flip_plan = match action {
        Some(point) => {
            let strategy = StrategyConfig {
                seed: cell_seed(rep_seed, point.index),
                ..point.strategy.clone()
            };
            plan(&prepared.train, &strategy).map_err(annotate)?
        }
        None => FlipPlan::empty("none", Some(0)),
    };
    let train = apply_plan(&prepared.train, &flip_plan).map_err(annotate)?;
    let model = train_firm(&cfg.firm, &train, derive_seed(rep_seed, stream::MODEL)).map_err(annotate)?;
    let test = &prepared.test;
    let pred = model.predict(test).map_err(annotate)?;
    let report = FairnessReport::compute(&pred, test.labels(), test.attribute()).map_err(annotate)?;
    let success = match &prepared.test_counterfactual {
        Some(cf) => Some(success(&model, test.features(), cf).map_err(annotate)?),
        None => None,
    };
    let after = dataset_sha256(test);
    if after != test_sha256 {
        return Err(HarnessError::TestSplitModified { before: test_sha256, after });
    }
    Ok(ExperimentResult {
        config_hash: cfg.hash(),
        sweep_axis: cfg.sweep.name().to_string(),
        sweep_value: label,
        seed: rep_seed,
        error: report.error,
        sp: report.sp,
        eqod: report.eqod,
        success,
        budget_used: flip_plan.budget_used,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        test_sha256,
    })
}

/// Load, split and run one cell.
pub fn run_once(cfg: &ExperimentConfig, action: Action<'_>, rep_seed: u64) -> Result<ExperimentResult> {
    cfg.validate()?;
    let source = LoadedSource::load(&cfg.data)?;
    let prepared = prepare(&source, rep_seed, cfg.test_fraction)?;
    run_prepared(cfg, &prepared, action, rep_seed)
}
