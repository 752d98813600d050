//! Four-Gaussian mixture with a spurious group direction.
//!
//! With labels `y ∈ {-1, +1}` and group sign `s` (+1 majority, -1 minority),
//! a row is drawn as `x = y·mu + y·s·psi + noise·z`, `z ~ N(0, I)`. The
//! majority class means therefore sit at `±(mu + psi)` and the minority ones
//! at `±(mu - psi)`. In the stored dataset the minority carries attribute 1.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{TabularDataset, MAJORITY, MINORITY};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

const ORTHOGONALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm4Params {
    pub mu: Vec<f64>,
    pub psi: Vec<f64>,
    pub n_major: usize,
    /// May be zero for majority-only samples.
    pub n_minor: usize,
    /// Per-coordinate standard deviation of the isotropic noise.
    pub noise: f64,
    #[serde(default = "default_balance")]
    pub label_balance: f64,
}

fn default_balance() -> f64 {
    0.5
}

impl Gmm4Params {
    /// Canonical planar instance: `mu = (0, mu_norm)`, `psi = (psi_norm, 0)`.
    pub fn planar(mu_norm: f64, psi_norm: f64, n_major: usize, n_minor: usize, noise: f64) -> Self {
        Self {
            mu: vec![0.0, mu_norm],
            psi: vec![psi_norm, 0.0],
            n_major,
            n_minor,
            noise,
            label_balance: 0.5,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.is_empty() || self.mu.len() != self.psi.len() {
            return Err(Error::InvalidParameter(format!(
                "mu has dimension {} and psi {}",
                self.mu.len(),
                self.psi.len()
            )));
        }
        if self.mu.iter().chain(&self.psi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("mu/psi must be finite".into()));
        }
        let dot: f64 = self.mu.iter().zip(&self.psi).map(|(a, b)| a * b).sum();
        if dot.abs() > ORTHOGONALITY_TOL {
            return Err(Error::InvalidParameter(format!(
                "mu and psi must be orthogonal, mu·psi = {dot}"
            )));
        }
        if self.n_major == 0 {
            return Err(Error::InvalidParameter("n_major must be at least 1".into()));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise must be positive, got {}",
                self.noise
            )));
        }
        if !(0.0..=1.0).contains(&self.label_balance) {
            return Err(Error::InvalidParameter(format!(
                "label_balance {} outside [0, 1]",
                self.label_balance
            )));
        }
        Ok(())
    }

    /// Class-conditional mean for label `y` (0/1) and stored attribute (0/1).
    pub fn cell_mean(&self, label: u8, attribute: u8) -> Vec<f64> {
        let y = if label == 1 { 1.0 } else { -1.0 };
        let s = if attribute == MINORITY { -1.0 } else { 1.0 };
        self.mu
            .iter()
            .zip(&self.psi)
            .map(|(m, p)| y * m + y * s * p)
            .collect()
    }
}

/// Draw `n_major` majority rows then `n_minor` minority rows.
///
/// Within each group exactly `round(count · label_balance)` rows are
/// positive; positives come first.
pub fn sample_gmm4(params: &Gmm4Params, seed: u64) -> Result<TabularDataset> {
    params.validate()?;
    let d = params.dim();
    let n = params.n_major + params.n_minor;
    let mut rng = rng_from_seed(seed);
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut attribute = Vec::with_capacity(n);
    for (count, group) in [(params.n_major, MAJORITY), (params.n_minor, MINORITY)] {
        let n_pos = (count as f64 * params.label_balance).round() as usize;
        for k in 0..count {
            let label = u8::from(k < n_pos);
            let mean = params.cell_mean(label, group);
            for m in mean {
                let z: f64 = StandardNormal.sample(&mut rng);
                features.push(m + params.noise * z);
            }
            labels.push(label);
            attribute.push(group);
        }
    }
    TabularDataset::from_flat(features, d, labels, attribute)
}

/// Majority-group counterfactual of a minority row with known label:
/// `x + 2·y'·psi`, `y' = ±1`.
pub fn counterfactual_gmm4(x: &[f64], label: u8, params: &Gmm4Params) -> Result<Vec<f64>> {
    if x.len() != params.psi.len() {
        return Err(Error::DimensionMismatch {
            expected: params.psi.len(),
            got: x.len(),
        });
    }
    let y = if label == 1 { 1.0 } else { -1.0 };
    Ok(x.iter()
        .zip(&params.psi)
        .map(|(xi, p)| xi + 2.0 * y * p)
        .collect())
}
