//! Error, statistical parity, equalized odds and collective success.
//!
//! All rates are plain empirical frequencies. A group or `(group, label)`
//! cell with no rows is an error rather than a NaN.

use serde::{Deserialize, Serialize};

use crate::data::{AtomMap, Coupling, DiscreteDistribution, MAJORITY, MINORITY};
use crate::error::{Error, Result};
use crate::models::Classifier;

fn check_lengths(n: usize, others: &[usize]) -> Result<()> {
    for &m in others {
        if m != n {
            return Err(Error::DimensionMismatch { expected: n, got: m });
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput("no predictions".into()));
    }
    Ok(())
}

fn rate(hits: usize, total: usize, cell: &str) -> Result<f64> {
    if total == 0 {
        return Err(Error::EmptyGroup(cell.to_string()));
    }
    Ok(hits as f64 / total as f64)
}

pub fn error_rate(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    check_lengths(predictions.len(), &[labels.len()])?;
    let wrong = predictions.iter().zip(labels).filter(|(p, y)| p != y).count();
    Ok(wrong as f64 / predictions.len() as f64)
}

/// `P(ŷ = 1 | a)` for `a = 0, 1`.
pub fn positive_rates(predictions: &[u8], attribute: &[u8]) -> Result<[f64; 2]> {
    check_lengths(predictions.len(), &[attribute.len()])?;
    let mut hits = [0usize; 2];
    let mut total = [0usize; 2];
    for (&p, &a) in predictions.iter().zip(attribute) {
        total[a as usize] += 1;
        hits[a as usize] += p as usize;
    }
    Ok([
        rate(hits[0], total[0], "a=0")?,
        rate(hits[1], total[1], "a=1")?,
    ])
}

/// `|P(ŷ=1 | a=1) - P(ŷ=1 | a=0)|`.
pub fn statistical_parity(predictions: &[u8], attribute: &[u8]) -> Result<f64> {
    let r = positive_rates(predictions, attribute)?;
    Ok((r[1] - r[0]).abs())
}

/// `P(ŷ = 1 | a, y)` indexed `[a][y]`, so `[a][1]` is the TPR and `[a][0]` the FPR.
pub fn conditional_rates(predictions: &[u8], labels: &[u8], attribute: &[u8]) -> Result<[[f64; 2]; 2]> {
    check_lengths(predictions.len(), &[labels.len(), attribute.len()])?;
    let mut hits = [[0usize; 2]; 2];
    let mut total = [[0usize; 2]; 2];
    for ((&p, &y), &a) in predictions.iter().zip(labels).zip(attribute) {
        total[a as usize][y as usize] += 1;
        hits[a as usize][y as usize] += p as usize;
    }
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for y in 0..2 {
            out[a][y] = rate(hits[a][y], total[a][y], &format!("a={a}, y={y}"))?;
        }
    }
    Ok(out)
}

/// `½ Σ_z |P(ŷ=1 | a=1, y=z) - P(ŷ=1 | a=0, y=z)|`.
pub fn equalized_odds(predictions: &[u8], labels: &[u8], attribute: &[u8]) -> Result<f64> {
    let r = conditional_rates(predictions, labels, attribute)?;
    Ok(0.5 * ((r[1][1] - r[0][1]).abs() + (r[1][0] - r[0][0]).abs()))
}

/// Everything measured on one evaluation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub error: f64,
    pub sp: f64,
    pub eqod: f64,
    /// Indexed by attribute value.
    pub positive_rate: [f64; 2],
    pub tpr: [f64; 2],
    pub fpr: [f64; 2],
    pub group_count: [usize; 2],
}

impl FairnessReport {
    pub const CSV_HEADER: [&'static str; 11] = [
        "error",
        "sp",
        "eqod",
        "positive_rate_a0",
        "positive_rate_a1",
        "tpr_a0",
        "tpr_a1",
        "fpr_a0",
        "fpr_a1",
        "count_a0",
        "count_a1",
    ];

    pub fn compute(predictions: &[u8], labels: &[u8], attribute: &[u8]) -> Result<Self> {
        let cond = conditional_rates(predictions, labels, attribute)?;
        let positive_rate = positive_rates(predictions, attribute)?;
        let tpr = [cond[0][1], cond[1][1]];
        let fpr = [cond[0][0], cond[1][0]];
        let group_count = [
            attribute.iter().filter(|&&a| a == MAJORITY).count(),
            attribute.iter().filter(|&&a| a == MINORITY).count(),
        ];
        Ok(Self {
            error: error_rate(predictions, labels)?,
            sp: (positive_rate[1] - positive_rate[0]).abs(),
            eqod: 0.5 * ((tpr[1] - tpr[0]).abs() + (fpr[1] - fpr[0]).abs()),
            positive_rate,
            tpr,
            fpr,
            group_count,
        })
    }

    /// Values in [`Self::CSV_HEADER`] order.
    pub fn csv_row(&self) -> Vec<String> {
        let mut row: Vec<String> = [
            self.error,
            self.sp,
            self.eqod,
            self.positive_rate[0],
            self.positive_rate[1],
            self.tpr[0],
            self.tpr[1],
            self.fpr[0],
            self.fpr[1],
        ]
        .iter()
        .map(f64::to_string)
        .collect();
        row.push(self.group_count[0].to_string());
        row.push(self.group_count[1].to_string());
        row
    }
}

/// Share of rows whose prediction is unchanged by the feature map:
/// `mean 1{h(x) = h(g(x))}`. Both buffers are flat row-major.
pub fn success(h: &dyn Classifier, features: &[f64], mapped: &[f64]) -> Result<f64> {
    if features.len() != mapped.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: mapped.len(),
        });
    }
    let a = h.predict_flat(features)?;
    let b = h.predict_flat(mapped)?;
    success_from_predictions(&a, &b)
}

pub fn success_from_predictions(on_x: &[u8], on_gx: &[u8]) -> Result<f64> {
    check_lengths(on_x.len(), &[on_gx.len()])?;
    let same = on_x.iter().zip(on_gx).filter(|(a, b)| a == b).count();
    Ok(same as f64 / on_x.len() as f64)
}

/// Exact success of an atom labeling under a coupling, optionally restricted
/// to one group: `1 - P(h(x) ≠ h(x_cf)) / P(group)`. Returns exactly 1 when no
/// pair disagrees.
pub fn exact_success(coupling: &Coupling, labels: &[u8], group: Option<u8>) -> Result<f64> {
    let mut total = 0.0;
    let mut disagree = 0.0;
    for p in &coupling.pairs {
        if group.is_some_and(|g| g != p.a) {
            continue;
        }
        let hx = *labels.get(p.x).ok_or(Error::UnknownAtom(p.x))?;
        let hcf = *labels.get(p.x_cf).ok_or(Error::UnknownAtom(p.x_cf))?;
        total += p.mass;
        if hx != hcf {
            disagree += p.mass;
        }
    }
    if total <= 0.0 {
        return Err(Error::EmptyGroup(format!("{group:?} has no mass")));
    }
    Ok(1.0 - disagree / total)
}

/// Conditional `P(y=1|x)` with 0.5 for atoms of zero mass.
fn conditional_or_half(dist: &DiscreteDistribution, x: usize) -> f64 {
    dist.p_y1_given_x(x).unwrap_or(0.5)
}

/// `E_x[ max_y (P(y|x) - P(y|g(x))) ]` under `dist`.
///
/// Conditionals at atoms without mass are taken as 0.5.
pub fn estimate_tau(dist: &DiscreteDistribution, g: &AtomMap) -> Result<f64> {
    if g.len() != dist.n_atoms() {
        return Err(Error::DimensionMismatch {
            expected: dist.n_atoms(),
            got: g.len(),
        });
    }
    let mut tau = 0.0;
    for x in 0..dist.n_atoms() {
        let gx = g.apply(x)?;
        if gx >= dist.n_atoms() {
            return Err(Error::UnknownAtom(gx));
        }
        let m = dist.atom_mass(x);
        if m == 0.0 {
            continue;
        }
        let p = conditional_or_half(dist, x);
        let q = conditional_or_half(dist, gx);
        // max over y of the gap; the two gaps are negatives of each other.
        tau += m * (p - q).abs();
    }
    Ok(tau)
}

/// Bayes label of every atom of `dist` (ties and empty atoms give 1).
pub fn bayes_labels(dist: &DiscreteDistribution) -> Vec<u8> {
    (0..dist.n_atoms())
        .map(|x| u8::from(conditional_or_half(dist, x) >= 0.5))
        .collect()
}

/// One-sided counterfactual fairness of the Bayes classifier of `dist`:
/// every minority pair of positive mass keeps its argmax label under the
/// counterfactual.
pub fn check_one_sided_cf_fairness(dist: &DiscreteDistribution, coupling: &Coupling) -> bool {
    let h = bayes_labels(dist);
    coupling
        .pairs
        .iter()
        .filter(|p| p.a == MINORITY && p.mass > 0.0)
        .all(|p| match (h.get(p.x), h.get(p.x_cf)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        })
}
