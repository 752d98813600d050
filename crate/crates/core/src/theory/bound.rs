use serde::{Deserialize, Serialize};

use crate::data::{enumerate_causal, AtomMap, CausalModelSpec, Coupling, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::metrics::{bayes_labels, estimate_tau, exact_success};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub alpha: f64,
    /// Probability that a collectively assigned label is wrong.
    pub label_error: f64,
    /// Suboptimality of the firm's classifier.
    pub epsilon: f64,
    pub tau: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !(0.0..0.5).contains(&self.label_error) {
            return Err(Error::InvalidParameter(format!(
                "label error {} outside [0, 0.5)",
                self.label_error
            )));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon {} outside [0, 1)", self.epsilon)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau {}", self.tau)));
        }
        Ok(())
    }
}

/// `1 - 2(1-α)τ / ((1-2ε̃)α) - ε / ((1-ε)(1-2ε̃)α)`, unclamped.
pub fn success_lower_bound(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let k = (1.0 - 2.0 * b.label_error) * b.alpha;
    Ok(1.0 - 2.0 * (1.0 - b.alpha) * b.tau / k - b.epsilon / ((1.0 - b.epsilon) * k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub alpha: f64,
    pub label_error: f64,
    pub tau: f64,
    pub success: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
    pub violations: usize,
    pub min_margin: f64,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Slack for float round-off when comparing success with the bound.
const MARGIN_TOL: f64 = 1e-12;

/// Training distribution of a collective that keeps its features `x ~ P0`
/// and reports `y*(x) = argmax_y P0(y | g(x))`, wrong with probability
/// `label_error`:
/// `P_α(x,a,y) = (1-α)P0(x,a,y) + α P0(x,a) [(1-ε̃)1{y=y*} + ε̃ 1{y≠y*}]`.
pub fn label_error_training_distribution(
    base: &DiscreteDistribution,
    g: &AtomMap,
    alpha: f64,
    label_error: f64,
) -> Result<DiscreteDistribution> {
    let target = bayes_labels(base);
    let mut mass = base.masses().to_vec();
    for (x, m) in mass.iter_mut().enumerate() {
        let ystar = target[g.apply(x)?] as usize;
        for a in 0..2 {
            let pxa = m[a][0] + m[a][1];
            for y in 0..2 {
                let share = if y == ystar { 1.0 - label_error } else { label_error };
                m[a][y] = (1.0 - alpha) * m[a][y] + alpha * pxa * share;
            }
        }
    }
    DiscreteDistribution::new(mass)
}

/// Exact success of the Bayes classifier trained on `P_α` against the bound,
/// over the grid. `g` must be idempotent: the bound's argument uses that
/// `g(x)` is its own counterfactual.
pub fn verify_success_bound(
    spec: &CausalModelSpec,
    g: &AtomMap,
    alphas: &[f64],
    label_errors: &[f64],
) -> Result<BoundReport> {
    let base = enumerate_causal(spec)?;
    if g.len() != base.n_atoms() {
        return Err(Error::DimensionMismatch {
            expected: base.n_atoms(),
            got: g.len(),
        });
    }
    if !g.is_idempotent() {
        return Err(Error::InvalidParameter("counterfactual map must be idempotent".into()));
    }
    let tau = estimate_tau(&base, g)?;
    let coupling = Coupling::from_map(&base, g)?;
    let mut rows = Vec::with_capacity(alphas.len() * label_errors.len());
    for &alpha in alphas {
        for &label_error in label_errors {
            let bound = success_lower_bound(&BoundInputs {
                alpha,
                label_error,
                epsilon: 0.0,
                tau,
            })?;
            let trained = label_error_training_distribution(&base, g, alpha, label_error)?;
            let success = exact_success(&coupling, &bayes_labels(&trained), None)?;
            rows.push(BoundRow {
                alpha,
                label_error,
                tau,
                success,
                bound,
                margin: success - bound,
            });
        }
    }
    let violations = rows.iter().filter(|r| r.margin < -MARGIN_TOL).count();
    let min_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(BoundReport {
        rows,
        violations,
        min_margin,
    })
}
