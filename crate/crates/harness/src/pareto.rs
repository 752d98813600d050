//! Error/EqOd trade-off: one point per budget, the no-action baseline and a
//! firm-side equalized-odds post-processing point.

use std::path::Path;

use serde::Serialize;

use acfair::data::split_indices;
use acfair::metrics::{equalized_odds, error_rate};
use acfair::rng::{derive_seed, stream};
use acfair::strategies::{postprocess_equalized_odds, DEFAULT_EQOD_TOLERANCE};

use crate::config::{ExperimentConfig, SweepAxis};
use crate::error::{HarnessError, Result};
use crate::pipeline::{prepare, repetition_seed, train_firm, LoadedSource};
use crate::sweep::{mean_std, sweep, RowKind, SweepOptions, SweepTable, BASELINE};

pub const POSTPROCESS: &str = "postprocess";
/// Share of the training split held out to fit the post-processor.
pub const POSTPROCESS_VALIDATION_FRACTION: f64 = 0.25;

pub const PARETO_COLUMNS: [&str; 8] = [
    "config_hash",
    "point",
    "error",
    "eqod",
    "error_std",
    "eqod_std",
    "n",
    "non_dominated",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub label: String,
    pub error: f64,
    pub eqod: f64,
    pub error_std: f64,
    pub eqod_std: f64,
    pub n: usize,
    pub non_dominated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoTable {
    pub config_hash: String,
    pub points: Vec<ParetoPoint>,
    pub sweep: SweepTable,
}

/// `true` for every point no other point dominates, both coordinates
/// minimized.
pub fn non_dominated(points: &[(f64, f64)]) -> Vec<bool> {
    points
        .iter()
        .map(|&(e, q)| {
            !points
                .iter()
                .any(|&(e2, q2)| e2 <= e && q2 <= q && (e2 < e || q2 < q))
        })
        .collect()
}

/// Per repetition: train the firm on the training split minus a held-out
/// validation part, fit the post-processor there, evaluate on the test split.
fn postprocess_point(cfg: &ExperimentConfig, source: &LoadedSource) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.repetitions {
        let rep_seed = repetition_seed(cfg.seed, rep);
        let prepared = prepare(source, rep_seed, cfg.test_fraction)?;
        let pp_seed = derive_seed(rep_seed, stream::POSTPROCESS);
        let (fit_idx, val_idx) = split_indices(prepared.train.len(), POSTPROCESS_VALIDATION_FRACTION, pp_seed)?;
        let fit = prepared.train.select(&fit_idx)?;
        let validation = prepared.train.select(&val_idx)?;
        let model = train_firm(&cfg.firm, &fit, derive_seed(rep_seed, stream::MODEL))?;
        let post = postprocess_equalized_odds(&model, &validation, DEFAULT_EQOD_TOLERANCE, pp_seed)?;
        let test = &prepared.test;
        let pred = post.predict(&model, test)?;
        out.push((
            error_rate(&pred, test.labels())?,
            equalized_odds(&pred, test.labels(), test.attribute())?,
        ));
    }
    Ok(out)
}

pub fn pareto(cfg: &ExperimentConfig, opts: &SweepOptions) -> Result<ParetoTable> {
    let cfg = match &cfg.sweep {
        SweepAxis::Budget(_) => cfg.clone(),
        SweepAxis::None => ExperimentConfig {
            sweep: SweepAxis::default_budgets(),
            ..cfg.clone()
        },
        other => {
            return Err(HarnessError::Config(format!(
                "pareto needs a budget sweep, config has {}",
                other.name()
            )))
        }
    };
    let table = sweep(&cfg, opts)?;
    let mut points: Vec<ParetoPoint> = table
        .rows_of(RowKind::Aggregate)
        .filter_map(|r| {
            Some(ParetoPoint {
                label: r.sweep_value.clone(),
                error: r.error?,
                eqod: r.eqod?,
                error_std: r.error_std?,
                eqod_std: r.eqod_std?,
                n: r.n?,
                non_dominated: false,
            })
        })
        .collect();
    let source = LoadedSource::load(&cfg.data)?;
    let pp = postprocess_point(&cfg, &source)?;
    let (error, error_std) = mean_std(&pp.iter().map(|p| p.0).collect::<Vec<_>>());
    let (eqod, eqod_std) = mean_std(&pp.iter().map(|p| p.1).collect::<Vec<_>>());
    points.push(ParetoPoint {
        label: POSTPROCESS.into(),
        error,
        eqod,
        error_std,
        eqod_std,
        n: pp.len(),
        non_dominated: false,
    });
    let flags = non_dominated(&points.iter().map(|p| (p.error, p.eqod)).collect::<Vec<_>>());
    for (p, f) in points.iter_mut().zip(flags) {
        p.non_dominated = f;
    }
    Ok(ParetoTable {
        config_hash: cfg.hash(),
        points,
        sweep: table,
    })
}

impl ParetoTable {
    pub fn point(&self, label: &str) -> Option<&ParetoPoint> {
        self.points.iter().find(|p| p.label == label)
    }

    pub fn baseline(&self) -> Option<&ParetoPoint> {
        self.point(BASELINE)
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(PARETO_COLUMNS)?;
        for p in &self.points {
            w.write_record([
                self.config_hash.clone(),
                p.label.clone(),
                p.error.to_string(),
                p.eqod.to_string(),
                p.error_std.to_string(),
                p.eqod_std.to_string(),
                p.n.to_string(),
                p.non_dominated.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()?).map_err(|e| HarnessError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_non_dominated() {
        assert_eq!(non_dominated(&[(0.3, 0.2)]), [true]);
    }

    #[test]
    fn worse_point_leaves_front_unchanged() {
        let front = [(0.1, 0.5), (0.2, 0.3), (0.4, 0.1)];
        assert_eq!(non_dominated(&front), [true; 3]);
        let mut with_worse = front.to_vec();
        with_worse.push((0.25, 0.35));
        assert_eq!(non_dominated(&with_worse), [true, true, true, false]);
    }

    #[test]
    fn duplicates_do_not_dominate_each_other() {
        assert_eq!(non_dominated(&[(0.2, 0.2), (0.2, 0.2)]), [true, true]);
        assert_eq!(non_dominated(&[(0.2, 0.2), (0.2, 0.3)]), [true, false]);
    }
}
