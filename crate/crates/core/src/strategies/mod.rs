//! The collective's label-flip planners.
//!
//! A plan lists minority training rows and their new labels. Only an
//! `alpha` share of the minority (the eligible set) may be flipped, at most
//! `budget` rows in total, and the planners that consult the majority see
//! only a `knowledge_fraction` sample of it.

mod postprocess;

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use postprocess::{postprocess_equalized_odds, EqOddsPostprocessor, DEFAULT_EQOD_TOLERANCE};

use crate::data::{pca_fit, TabularDataset, MINORITY};
use crate::error::{Error, Result};
use crate::models::{train_gbt, train_logreg, Classifier, GbtParams, KnnIndex, LogregParams};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::theory::fair_projection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    ByLabel,
    ByDistance,
    ByProbability,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::ByLabel => "by_label",
            StrategyKind::ByDistance => "by_distance",
            StrategyKind::ByProbability => "by_probability",
        }
    }
}

/// Feature space in which `by_distance` measures distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Representation {
    #[default]
    Raw,
    /// Principal components fitted on the rows the collective can see.
    Pca { components: usize },
    /// Orthogonal projection removing `(mu - mu_min)/2`.
    Projection { mu: Vec<f64>, mu_min: Vec<f64> },
}

/// Model the collective trains on the visible majority for `by_probability`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurrogateModel {
    Gbt(GbtParams),
    Logreg(LogregParams),
}

impl Default for SurrogateModel {
    fn default() -> Self {
        SurrogateModel::Gbt(GbtParams::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub alpha: f64,
    /// Maximum number of flips; `None` is unlimited.
    pub budget: Option<usize>,
    pub knowledge_fraction: f64,
    pub k_neighbors: usize,
    pub representation: Representation,
    pub surrogate: SurrogateModel,
    pub seed: u64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: StrategyKind::ByProbability,
            alpha: 0.3,
            budget: None,
            knowledge_fraction: 1.0,
            k_neighbors: 5,
            representation: Representation::Raw,
            surrogate: SurrogateModel::default(),
            seed: 0,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !(self.knowledge_fraction > 0.0 && self.knowledge_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "knowledge_fraction {} outside (0, 1]",
                self.knowledge_fraction
            )));
        }
        if self.k_neighbors == 0 {
            return Err(Error::InvalidParameter("k_neighbors must be at least 1".into()));
        }
        Ok(())
    }

    fn cap(&self) -> usize {
        self.budget.unwrap_or(usize::MAX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flip {
    pub index: usize,
    pub new_label: u8,
}

/// Ordered relabeling of minority training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipPlan {
    pub strategy: String,
    pub budget_requested: Option<usize>,
    pub budget_used: usize,
    pub flips: Vec<Flip>,
}

impl FlipPlan {
    pub fn empty(strategy: &str, budget: Option<usize>) -> Self {
        Self {
            strategy: strategy.to_string(),
            budget_requested: budget,
            budget_used: 0,
            flips: Vec::new(),
        }
    }

    fn from_flips(strategy: &str, budget: Option<usize>, flips: Vec<Flip>) -> Self {
        Self {
            strategy: strategy.to_string(),
            budget_requested: budget,
            budget_used: flips.len(),
            flips,
        }
    }

    pub fn len(&self) -> usize {
        self.flips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flips.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.flips.iter().map(|f| f.index).collect()
    }

    /// Check every plan invariant against `data`.
    pub fn validate(&self, data: &TabularDataset) -> Result<()> {
        if self.budget_used != self.flips.len() {
            return Err(Error::InvalidPlan(format!(
                "budget_used {} but {} flips",
                self.budget_used,
                self.flips.len()
            )));
        }
        if let Some(b) = self.budget_requested {
            if self.flips.len() > b {
                return Err(Error::InvalidPlan(format!(
                    "{} flips exceed budget {b}",
                    self.flips.len()
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for f in &self.flips {
            if f.index >= data.len() {
                return Err(Error::InvalidPlan(format!("row {} out of bounds", f.index)));
            }
            if !seen.insert(f.index) {
                return Err(Error::InvalidPlan(format!("row {} listed twice", f.index)));
            }
            if data.attribute()[f.index] != MINORITY {
                return Err(Error::InvalidPlan(format!("row {} is not a minority row", f.index)));
            }
            if f.new_label > 1 || f.new_label == data.labels()[f.index] {
                return Err(Error::InvalidPlan(format!(
                    "row {} does not change its label",
                    f.index
                )));
            }
        }
        Ok(())
    }

    /// `index,new_label` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "new_label"])?;
        for f in &self.flips {
            w.write_record([f.index.to_string(), f.new_label.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("ascii output"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn ceil_share(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

fn seeded_subset(mut pool: Vec<usize>, count: usize, seed: u64) -> Vec<usize> {
    pool.shuffle(&mut rng_from_seed(seed));
    pool.truncate(count);
    pool.sort_unstable();
    pool
}

/// `ceil(alpha · n_minority)` minority rows drawn with the seed, ascending.
pub fn eligible_set(data: &TabularDataset, alpha: f64, seed: u64) -> Result<Vec<usize>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1]")));
    }
    let minority = data.minority_indices();
    if minority.is_empty() {
        return Err(Error::EmptyGroup("no minority rows".into()));
    }
    let count = ceil_share(alpha, minority.len());
    Ok(seeded_subset(minority, count, derive_seed(seed, stream::ELIGIBLE)))
}

/// Majority rows visible to the collective, ascending.
pub fn visible_majority(data: &TabularDataset, knowledge_fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(knowledge_fraction > 0.0 && knowledge_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "knowledge_fraction {knowledge_fraction} outside (0, 1]"
        )));
    }
    let majority = data.majority_indices();
    if majority.is_empty() {
        return Err(Error::EmptyGroup("no majority rows".into()));
    }
    if knowledge_fraction >= 1.0 {
        return Ok(majority);
    }
    let count = ceil_share(knowledge_fraction, majority.len());
    Ok(seeded_subset(majority, count, derive_seed(seed, stream::KNOWLEDGE)))
}

fn flip_of(data: &TabularDataset, index: usize) -> Flip {
    Flip {
        index,
        new_label: 1 - data.labels()[index],
    }
}

pub fn plan_random(data: &TabularDataset, cfg: &StrategyConfig) -> Result<FlipPlan> {
    cfg.validate()?;
    let mut pool = eligible_set(data, cfg.alpha, cfg.seed)?;
    pool.shuffle(&mut rng_from_seed(derive_seed(cfg.seed, stream::PLAN)));
    let flips = pool.into_iter().take(cfg.cap()).map(|i| flip_of(data, i)).collect();
    Ok(FlipPlan::from_flips("random", cfg.budget, flips))
}

/// Flips towards the majority's positive rate. When the minority's positive
/// rate is below the (visible) majority's, or equal to it, eligible `0` labels
/// become `1`; otherwise eligible `1` labels become `0`. Rows are chosen
/// uniformly at random.
pub fn plan_by_label(data: &TabularDataset, cfg: &StrategyConfig) -> Result<FlipPlan> {
    cfg.validate()?;
    let eligible = eligible_set(data, cfg.alpha, cfg.seed)?;
    let majority = visible_majority(data, cfg.knowledge_fraction, cfg.seed)?;
    let minority = data.minority_indices();
    let rate = |rows: &[usize]| {
        rows.iter().map(|&i| f64::from(data.labels()[i])).sum::<f64>() / rows.len() as f64
    };
    let from_label = if rate(&minority) <= rate(&majority) { 0 } else { 1 };
    let mut pool: Vec<usize> = eligible
        .into_iter()
        .filter(|&i| data.labels()[i] == from_label)
        .collect();
    pool.shuffle(&mut rng_from_seed(derive_seed(cfg.seed, stream::PLAN)));
    let flips = pool.into_iter().take(cfg.cap()).map(|i| flip_of(data, i)).collect();
    Ok(FlipPlan::from_flips("by_label", cfg.budget, flips))
}

/// Keep the `cap` most confident disagreements; ties go to the lower index.
fn ranked(mut candidates: Vec<(f64, usize, u8)>, cap: usize) -> Vec<Flip> {
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    candidates
        .into_iter()
        .take(cap)
        .map(|(_, index, new_label)| Flip { index, new_label })
        .collect()
}

pub fn plan_by_probability(data: &TabularDataset, cfg: &StrategyConfig) -> Result<FlipPlan> {
    cfg.validate()?;
    let eligible = eligible_set(data, cfg.alpha, cfg.seed)?;
    let visible = data.select(&visible_majority(data, cfg.knowledge_fraction, cfg.seed)?)?;
    if !visible.has_both_classes() {
        return Err(Error::SingleClass);
    }
    let seed = derive_seed(cfg.seed, stream::MODEL);
    let model: Box<dyn Classifier> = match &cfg.surrogate {
        SurrogateModel::Gbt(p) => Box::new(train_gbt(&visible, p, seed)?),
        SurrogateModel::Logreg(p) => Box::new(train_logreg(&visible, p, seed)?),
    };
    let candidates = eligible
        .into_iter()
        .filter_map(|i| {
            let p1 = model.proba_row(data.row(i));
            let predicted = model.predict_row(data.row(i));
            let confidence = if predicted == 1 { p1 } else { 1.0 - p1 };
            (predicted != data.labels()[i]).then_some((confidence, i, predicted))
        })
        .collect();
    Ok(FlipPlan::from_flips(
        "by_probability",
        cfg.budget,
        ranked(candidates, cfg.cap()),
    ))
}

/// Row map for the configured representation, fitted on what the collective
/// sees: the visible majority and the minority.
fn representation_map(
    data: &TabularDataset,
    visible: &[usize],
    repr: &Representation,
) -> Result<Box<dyn Fn(&[f64]) -> Vec<f64>>> {
    match repr {
        Representation::Raw => Ok(Box::new(|x: &[f64]| x.to_vec())),
        Representation::Pca { components } => {
            let mut rows = visible.to_vec();
            rows.extend(data.minority_indices());
            rows.sort_unstable();
            let t = pca_fit(&data.select(&rows)?, *components)?;
            Ok(Box::new(move |x: &[f64]| t.project(x).expect("dimension checked at fit")))
        }
        Representation::Projection { mu, mu_min } => {
            if mu.len() != data.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: data.n_features(),
                    got: mu.len(),
                });
            }
            let p = fair_projection(mu, mu_min)?;
            Ok(Box::new(move |x: &[f64]| {
                (0..p.nrows())
                    .map(|i| (0..p.ncols()).map(|j| p[(i, j)] * x[j]).sum())
                    .collect()
            }))
        }
    }
}

pub fn plan_by_distance(data: &TabularDataset, cfg: &StrategyConfig) -> Result<FlipPlan> {
    cfg.validate()?;
    let eligible = eligible_set(data, cfg.alpha, cfg.seed)?;
    let visible = visible_majority(data, cfg.knowledge_fraction, cfg.seed)?;
    if cfg.k_neighbors > visible.len() {
        return Err(Error::InvalidParameter(format!(
            "k_neighbors {} exceeds {} visible majority rows",
            cfg.k_neighbors,
            visible.len()
        )));
    }
    let map = representation_map(data, &visible, &cfg.representation)?;
    let mut points = Vec::new();
    let mut width = 0;
    for &i in &visible {
        let z = map(data.row(i));
        width = z.len();
        points.extend(z);
    }
    let labels = visible.iter().map(|&i| data.labels()[i]).collect();
    let index = KnnIndex::new(points, width, labels, cfg.k_neighbors)?;
    let mut candidates = Vec::new();
    for i in eligible {
        let (label, confidence) = index.label(&map(data.row(i)))?;
        if label != data.labels()[i] {
            candidates.push((confidence, i, label));
        }
    }
    Ok(FlipPlan::from_flips(
        "by_distance",
        cfg.budget,
        ranked(candidates, cfg.cap()),
    ))
}

/// Dispatch on `cfg.kind`.
pub fn plan(data: &TabularDataset, cfg: &StrategyConfig) -> Result<FlipPlan> {
    match cfg.kind {
        StrategyKind::Random => plan_random(data, cfg),
        StrategyKind::ByLabel => plan_by_label(data, cfg),
        StrategyKind::ByDistance => plan_by_distance(data, cfg),
        StrategyKind::ByProbability => plan_by_probability(data, cfg),
    }
}

/// Copy of `data` with the plan's labels written in.
pub fn apply_plan(data: &TabularDataset, plan: &FlipPlan) -> Result<TabularDataset> {
    plan.validate(data)?;
    let mut labels = data.labels().to_vec();
    for f in &plan.flips {
        labels[f.index] = f.new_label;
    }
    data.with_labels(labels)
}

/// Inverse of a validated plan: puts the labels of `original` back.
pub fn restore_labels(modified: &TabularDataset, original: &TabularDataset) -> Result<TabularDataset> {
    modified.with_labels(original.labels().to_vec())
}
