//! Firm-side equalized-odds post-processing.
//!
//! The base prediction `ŷ` of a row in group `a` is replaced by 1 with
//! probability `p[a][ŷ]`. The four mixing probabilities minimise expected
//! validation error subject to the group TPR and FPR gaps staying within a
//! tolerance. The problem is a linear program in four variables; it is
//! solved exactly by enumerating the vertices of its feasible polytope.
//! Raw odds are equalized; calibration is not preserved.

use nalgebra::{Matrix4, Vector4};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::metrics::conditional_rates;
use crate::models::Classifier;
use crate::rng::{derive_seed, rng_from_seed, stream};

pub const DEFAULT_EQOD_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqOddsPostprocessor {
    /// `mix[a][ŷ] = P(output 1 | group a, base prediction ŷ)`.
    pub mix: [[f64; 2]; 2],
    /// Expected validation error after mixing.
    pub expected_error: f64,
    /// Expected TPR and FPR per group after mixing, indexed `[a]`.
    pub expected_tpr: [f64; 2],
    pub expected_fpr: [f64; 2],
    pub seed: u64,
}

// Variable order: p[0][0], p[0][1], p[1][0], p[1][1].
fn var(a: usize, yhat: usize) -> usize {
    2 * a + yhat
}

/// All index quadruples `i < j < k < l` below `n`.
fn quadruples(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    out.push([i, j, k, l]);
                }
            }
        }
    }
    out
}

/// Derive the mixing probabilities from validation predictions.
pub fn fit_mixing(
    predictions: &[u8],
    labels: &[u8],
    attribute: &[u8],
    tolerance: f64,
) -> Result<([[f64; 2]; 2], f64)> {
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tolerance}")));
    }
    let rates = conditional_rates(predictions, labels, attribute)
        .map_err(|e| Error::Infeasible(format!("post-processing needs every (a, y) cell: {e}")))?;
    let n = labels.len() as f64;
    let mut cell = [[0.0; 2]; 2];
    for (&y, &a) in labels.iter().zip(attribute) {
        cell[a as usize][y as usize] += 1.0 / n;
    }
    // Output-1 probability of cell (a, y) is linear in the variables:
    // P(ŷ=1|a,y)·p[a][1] + P(ŷ=0|a,y)·p[a][0].
    let rate_row = |a: usize, y: usize| {
        let mut r = [0.0; 4];
        r[var(a, 1)] = rates[a][y];
        r[var(a, 0)] = 1.0 - rates[a][y];
        r
    };
    // Expected error = Σ_a P(a,1)(1 - TPR'_a) + P(a,0) FPR'_a = const + c·p.
    let mut cost = [0.0; 4];
    let mut constant = 0.0;
    for a in 0..2 {
        constant += cell[a][1];
        let tp = rate_row(a, 1);
        let fp = rate_row(a, 0);
        for k in 0..4 {
            cost[k] += -cell[a][1] * tp[k] + cell[a][0] * fp[k];
        }
    }
    // Constraints g·p <= h.
    let mut cons: Vec<([f64; 4], f64)> = Vec::new();
    for k in 0..4 {
        let mut e = [0.0; 4];
        e[k] = 1.0;
        cons.push((e, 1.0));
        e[k] = -1.0;
        cons.push((e, 0.0));
    }
    for y in 0..2 {
        let r1 = rate_row(1, y);
        let r0 = rate_row(0, y);
        let gap: [f64; 4] = std::array::from_fn(|k| r1[k] - r0[k]);
        cons.push((gap, tolerance));
        cons.push((gap.map(|v| -v), tolerance));
    }

    const FEAS: f64 = 1e-10;
    let identity = [0.0, 1.0, 0.0, 1.0];
    let mut best: Option<([f64; 4], f64, f64)> = None;
    for combo in quadruples(cons.len()) {
        let m = Matrix4::from_fn(|r, c| cons[combo[r]].0[c]);
        let rhs = Vector4::from_fn(|r, _| cons[combo[r]].1);
        let Some(sol) = m.lu().solve(&rhs) else { continue };
        let p: [f64; 4] = std::array::from_fn(|k| sol[k]);
        if p.iter().any(|v| !v.is_finite()) {
            continue;
        }
        if cons
            .iter()
            .any(|(g, h)| g.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() > h + FEAS)
        {
            continue;
        }
        let p = p.map(|v| v.clamp(0.0, 1.0));
        let obj = constant + cost.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>();
        let dist: f64 = p.iter().zip(&identity).map(|(a, b)| (a - b).abs()).sum();
        let better = match &best {
            None => true,
            Some((_, bo, bd)) => obj < bo - 1e-12 || (obj <= bo + 1e-12 && dist < bd - 1e-12),
        };
        if better {
            best = Some((p, obj, dist));
        }
    }
    let (p, obj, _) = best.ok_or_else(|| Error::Infeasible("no feasible mixing found".into()))?;
    Ok(([[p[0], p[1]], [p[2], p[3]]], obj))
}

impl EqOddsPostprocessor {
    /// Randomised predictions. Row `i` draws its own uniform from the
    /// post-processing stream of `seed`, so the output is reproducible.
    pub fn apply(&self, base_predictions: &[u8], attribute: &[u8]) -> Result<Vec<u8>> {
        if base_predictions.len() != attribute.len() {
            return Err(Error::DimensionMismatch {
                expected: base_predictions.len(),
                got: attribute.len(),
            });
        }
        let mut rng = rng_from_seed(derive_seed(self.seed, stream::POSTPROCESS));
        Ok(base_predictions
            .iter()
            .zip(attribute)
            .map(|(&yhat, &a)| {
                let u: f64 = rng.random();
                u8::from(u < self.mix[a as usize][yhat as usize])
            })
            .collect())
    }

    pub fn predict(&self, model: &dyn Classifier, data: &TabularDataset) -> Result<Vec<u8>> {
        let base = model.predict(data)?;
        self.apply(&base, data.attribute())
    }
}

/// Fit the post-processor for `model` on `validation`.
pub fn postprocess_equalized_odds(
    model: &dyn Classifier,
    validation: &TabularDataset,
    tolerance: f64,
    seed: u64,
) -> Result<EqOddsPostprocessor> {
    let base = model.predict(validation)?;
    let (mix, expected_error) = fit_mixing(&base, validation.labels(), validation.attribute(), tolerance)?;
    let rates = conditional_rates(&base, validation.labels(), validation.attribute())?;
    let mixed = |a: usize, y: usize| rates[a][y] * mix[a][1] + (1.0 - rates[a][y]) * mix[a][0];
    Ok(EqOddsPostprocessor {
        mix,
        expected_error,
        expected_tpr: [mixed(0, 1), mixed(1, 1)],
        expected_fpr: [mixed(0, 0), mixed(1, 0)],
        seed,
    })
}
