//! The theory verifiers at their default configurations, with a JSON
//! summary per check.

use std::str::FromStr;
use std::time::Instant;

use acfair::data::Gmm4Params;
use acfair::rng::derive_seed;
use acfair::theory::{
    empirical_1nn_error, fair_projection, random_causal_spec, random_idempotent_map, snr_report,
    spurious_direction_experiment, verify_cf_equivalence, verify_success_bound, GaussianPairParams, RelabelPolicy,
    SpuriousConfig,
};
use serde::Serialize;
use serde_json::json;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoryTarget {
    All,
    /// Success bound under label error.
    SuccessBound,
    /// Full success iff one-sided counterfactual fairness under erasure.
    CfEquivalence,
    /// Max-margin learner on the four-Gaussian mixture.
    Spurious,
    /// 1NN label transfer between Gaussian pairs.
    KnnTransfer,
}

impl TheoryTarget {
    pub const NAMES: [&'static str; 5] = ["all", "success-bound", "cf-equivalence", "spurious", "knn-transfer"];
}

impl FromStr for TheoryTarget {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => TheoryTarget::All,
            "success-bound" => TheoryTarget::SuccessBound,
            "cf-equivalence" => TheoryTarget::CfEquivalence,
            "spurious" => TheoryTarget::Spurious,
            "knn-transfer" => TheoryTarget::KnnTransfer,
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown check {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckSummary {
    pub name: &'static str,
    pub passed: bool,
    pub runtime_ms: f64,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheorySummary {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckSummary>,
}

pub const BOUND_MODELS: usize = 50;
pub const BOUND_ATOMS: usize = 6;
pub const BOUND_LATENTS: usize = 8;
pub const BOUND_ALPHAS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const BOUND_LABEL_ERRORS: [f64; 4] = [0.0, 0.1, 0.25, 0.4];

pub fn check_success_bound(seed: u64) -> Result<CheckSummary> {
    let start = Instant::now();
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    let mut rows = 0;
    for i in 0..BOUND_MODELS as u64 {
        let spec = random_causal_spec(BOUND_ATOMS, BOUND_LATENTS, derive_seed(seed, 2 * i));
        let g = random_idempotent_map(BOUND_ATOMS, derive_seed(seed, 2 * i + 1));
        let report = verify_success_bound(&spec, &g, &BOUND_ALPHAS, &BOUND_LABEL_ERRORS)?;
        violations += report.violations;
        min_margin = min_margin.min(report.min_margin);
        rows += report.rows.len();
    }
    Ok(CheckSummary {
        name: "success-bound",
        passed: violations == 0,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        details: json!({
            "models": BOUND_MODELS,
            "grid_points": rows,
            "violations": violations,
            "min_margin": min_margin,
        }),
    })
}

pub const CF_MODELS: usize = 50;
pub const CF_ALPHAS: [f64; 8] = [0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0];

pub fn check_cf_equivalence(seed: u64) -> Result<CheckSummary> {
    let start = Instant::now();
    let mut exceptions = 0;
    let mut max_gap: f64 = 0.0;
    let mut full_success = 0;
    let mut runs = 0;
    for i in 0..CF_MODELS as u64 {
        let spec = random_causal_spec(BOUND_ATOMS, BOUND_LATENTS, derive_seed(seed, 1000 + i));
        for &alpha in &CF_ALPHAS {
            let r = verify_cf_equivalence(&spec, alpha)?;
            runs += 1;
            if !r.passed() {
                exceptions += 1;
            }
            if r.success == 1.0 {
                full_success += 1;
            }
            max_gap = max_gap.max(r.decomposition_gap);
        }
    }
    Ok(CheckSummary {
        name: "cf-equivalence",
        passed: exceptions == 0,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        details: json!({
            "models": CF_MODELS,
            "runs": runs,
            "exceptions": exceptions,
            "full_success_runs": full_success,
            "max_decomposition_gap": max_gap,
        }),
    })
}

pub const SPURIOUS_SEEDS: usize = 10;
pub const SPURIOUS_MAX_ANGLE_DEG: f64 = 15.0;
pub const SPURIOUS_EQOD_TOL: f64 = 0.1;

pub fn spurious_params() -> Gmm4Params {
    Gmm4Params::planar(1.0, 1.0, 20_000, 30, 0.25)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn check_spurious(seed: u64) -> Result<CheckSummary> {
    let start = Instant::now();
    let params = spurious_params();
    let cfg = SpuriousConfig::default();
    let mut policies = Vec::new();
    let mut passed = true;
    for policy in RelabelPolicy::ALL {
        let mut angles = Vec::new();
        let mut gaps = Vec::new();
        for i in 0..SPURIOUS_SEEDS as u64 {
            let out = spurious_direction_experiment(&params, policy, &cfg, derive_seed(seed, 2000 + i))?;
            angles.push(out.angle_deg);
            gaps.push((out.eqod - 0.5).abs());
        }
        let median_angle = median(&mut angles);
        let median_gap = median(&mut gaps);
        let ok = median_angle < SPURIOUS_MAX_ANGLE_DEG && median_gap < SPURIOUS_EQOD_TOL;
        passed &= ok;
        policies.push(json!({
            "policy": policy.name(),
            "median_angle_deg": median_angle,
            "median_abs_eqod_minus_half": median_gap,
            "passed": ok,
        }));
    }
    Ok(CheckSummary {
        name: "spurious",
        passed,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        details: json!({ "params": params, "seeds": SPURIOUS_SEEDS, "policies": policies }),
    })
}

pub const KNN_REFERENCES: usize = 20_000;
pub const KNN_QUERIES: usize = 20_000;
pub const KNN_TOL: f64 = 0.01;
pub const PROJECTION_MARGIN: f64 = 0.02;

fn diag(v: &[f64]) -> Vec<Vec<f64>> {
    (0..v.len())
        .map(|i| (0..v.len()).map(|j| if i == j { v[i] } else { 0.0 }).collect())
        .collect()
}

/// Parameter sets for the closed-form comparison. Each keeps the query
/// classes inside the dense part of the reference classes, where the finite
/// sample 1NN rule follows the density argmax.
pub fn knn_parameter_sets() -> Vec<GaussianPairParams> {
    vec![
        GaussianPairParams {
            mu: vec![2.0, 2.0],
            sigma: diag(&[0.25, 0.5]),
            mu_min: vec![1.4, 1.4],
            sigma_min: diag(&[1.0, 1.0]),
        },
        GaussianPairParams {
            mu: vec![0.0, 3.0],
            sigma: diag(&[2.0, 1.0]),
            mu_min: vec![0.0, 2.1],
            sigma_min: diag(&[2.0, 2.0]),
        },
        GaussianPairParams::isotropic(vec![3.0, 1.0, 0.0], 0.25, vec![2.0, 0.0, 1.0], 1.0),
        GaussianPairParams::isotropic(vec![2.0, 2.0, 2.0, 0.0, 0.0], 0.25, vec![1.5, 1.0, 0.5, 0.5, 0.0], 1.0),
        GaussianPairParams {
            mu: vec![0.0, 3.0],
            sigma: diag(&[0.5, 0.25]),
            mu_min: vec![0.0, 1.0],
            sigma_min: diag(&[1.0, 1.0]),
        },
    ]
}

/// Minority means pointing against the majority direction: the raw 1NN
/// labels are mostly wrong and the projection repairs them.
pub fn projection_parameter_set() -> GaussianPairParams {
    GaussianPairParams::isotropic(vec![2.0, 2.0], 0.25, vec![-4.0, 2.0], 1.0)
}

pub fn check_knn_transfer(seed: u64) -> Result<CheckSummary> {
    let start = Instant::now();
    let mut passed = true;
    let mut sets = Vec::new();
    for (i, g) in knn_parameter_sets().iter().enumerate() {
        let closed = acfair::theory::asymptotic_1nn_error(g)?;
        let empirical = empirical_1nn_error(g, KNN_REFERENCES, KNN_QUERIES, derive_seed(seed, 3000 + i as u64), None)?;
        let ok = (empirical - closed).abs() < KNN_TOL;
        passed &= ok;
        sets.push(json!({ "params": g, "closed_form": closed, "empirical": empirical, "passed": ok }));
    }
    let g = projection_parameter_set();
    let report = snr_report(&g)?;
    let p = fair_projection(&g.mu, &g.mu_min)?;
    let proj_seed = derive_seed(seed, 3100);
    let raw = empirical_1nn_error(&g, KNN_REFERENCES, KNN_QUERIES, proj_seed, None)?;
    let projected = empirical_1nn_error(&g, KNN_REFERENCES, KNN_QUERIES, proj_seed, Some(&p))?;
    // Asserted only where the prediction says the projection helps and the
    // raw labels are worse than chance.
    let applicable = report.projection_predicted_better && raw > 0.5;
    let projection_ok = !applicable || raw - projected >= PROJECTION_MARGIN;
    passed &= projection_ok;
    Ok(CheckSummary {
        name: "knn-transfer",
        passed,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        details: json!({
            "references": KNN_REFERENCES,
            "queries": KNN_QUERIES,
            "sets": sets,
            "projection": {
                "params": g,
                "report": report,
                "empirical_raw": raw,
                "empirical_projected": projected,
                "applicable": applicable,
                "passed": projection_ok,
            },
        }),
    })
}

pub fn theory_check(which: TheoryTarget, seed: u64) -> Result<TheorySummary> {
    let mut checks = Vec::new();
    let all = which == TheoryTarget::All;
    if all || which == TheoryTarget::SuccessBound {
        checks.push(check_success_bound(seed)?);
    }
    if all || which == TheoryTarget::CfEquivalence {
        checks.push(check_cf_equivalence(seed)?);
    }
    if all || which == TheoryTarget::Spurious {
        checks.push(check_spurious(seed)?);
    }
    if all || which == TheoryTarget::KnnTransfer {
        checks.push(check_knn_transfer(seed)?);
    }
    Ok(TheorySummary {
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
