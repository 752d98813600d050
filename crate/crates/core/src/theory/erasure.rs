use serde::{Deserialize, Serialize};

use crate::data::{enumerate_causal, CausalModelSpec, Coupling, DiscreteDistribution, MINORITY};
use crate::error::{Error, Result};
use crate::metrics::{bayes_labels, check_one_sided_cf_fairness, exact_success};

/// Training distribution under the erasure collective:
/// `P_α = α P* + (1-α) P0`, where `P*` draws a minority member `(1, u)`,
/// keeps its features `f(1, u)` and labels it with the Bayes label of its
/// majority counterfactual `f(0, u)`.
pub fn erasure_training_distribution(spec: &CausalModelSpec, alpha: f64) -> Result<DiscreteDistribution> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside [0, 1]")));
    }
    let base = enumerate_causal(spec)?;
    let target = bayes_labels(&base);
    let mut mass = base.masses().to_vec();
    for m in mass.iter_mut() {
        for a in m.iter_mut() {
            for v in a.iter_mut() {
                *v *= 1.0 - alpha;
            }
        }
    }
    for (u, pu) in spec.u_probs.iter().enumerate() {
        let x = spec.feature_map[u][MINORITY as usize];
        let y = target[spec.feature_map[u][0]] as usize;
        mass[x][MINORITY as usize][y] += alpha * pu;
    }
    DiscreteDistribution::new(mass)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfEquivalenceReport {
    pub alpha: f64,
    pub beta: f64,
    pub success: f64,
    /// Success restricted to the minority; 1 when the minority has no mass.
    pub minority_success: f64,
    pub cf_fair: bool,
    /// `|S - (1 - β(1 - S_minority))|`.
    pub decomposition_gap: f64,
    pub equivalence_holds: bool,
    pub decomposition_holds: bool,
}

impl CfEquivalenceReport {
    pub fn passed(&self) -> bool {
        self.equivalence_holds && self.decomposition_holds
    }
}

pub const DECOMPOSITION_TOL: f64 = 1e-12;

/// Exact success of the Bayes classifier on the erasure training
/// distribution, measured on the base distribution, against one-sided
/// counterfactual fairness of that classifier.
pub fn verify_cf_equivalence(spec: &CausalModelSpec, alpha: f64) -> Result<CfEquivalenceReport> {
    let trained = erasure_training_distribution(spec, alpha)?;
    let h = bayes_labels(&trained);
    let coupling = Coupling::erasure(spec)?;
    let success = exact_success(&coupling, &h, None)?;
    let minority_success = if coupling.group_mass(MINORITY) > 0.0 {
        exact_success(&coupling, &h, Some(MINORITY))?
    } else {
        1.0
    };
    let cf_fair = check_one_sided_cf_fairness(&trained, &coupling);
    let decomposition_gap = (success - (1.0 - spec.beta * (1.0 - minority_success))).abs();
    Ok(CfEquivalenceReport {
        alpha,
        beta: spec.beta,
        success,
        minority_success,
        cf_fair,
        decomposition_gap,
        equivalence_holds: (success == 1.0) == cf_fair,
        decomposition_holds: decomposition_gap <= DECOMPOSITION_TOL,
    })
}
