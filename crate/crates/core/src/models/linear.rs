use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{require_both_classes, sigmoid, softplus, Classifier};
use crate::data::TabularDataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// `x -> 1{w·x + b >= 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LinearModel {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(Error::InvalidParameter("non-finite linear model".into()));
        }
        Ok(Self { w, b })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b
    }

    pub fn norm(&self) -> f64 {
        self.w.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Classifier for LinearModel {
    fn n_features(&self) -> usize {
        self.w.len()
    }

    /// Logistic link of the score. Kept strictly below 0.5 for negative
    /// scores so that thresholding agrees with the sign rule.
    fn proba_row(&self, x: &[f64]) -> f64 {
        let z = self.score(x);
        let p = sigmoid(z);
        if z < 0.0 && p >= 0.5 {
            0.5 - f64::EPSILON
        } else {
            p
        }
    }

    fn predict_row(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogregParams {
    /// Coefficient of `l2/2 · |w|²`; the intercept is not penalised.
    pub l2: f64,
    pub epochs: usize,
    /// Early stop once the full gradient norm drops below this.
    pub grad_tol: f64,
}

impl Default for LogregParams {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            epochs: 2000,
            grad_tol: 1e-10,
        }
    }
}

/// Mean logistic loss plus `l2/2 · |w|²`.
pub fn logistic_loss(model: &LinearModel, data: &TabularDataset, l2: f64) -> f64 {
    let n = data.len() as f64;
    let data_term: f64 = data
        .rows()
        .zip(data.labels())
        .map(|(x, &y)| {
            let z = model.score(x);
            softplus(z) - f64::from(y) * z
        })
        .sum::<f64>()
        / n;
    data_term + 0.5 * l2 * model.w.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of [`logistic_loss`]: `(dL/dw, dL/db)`.
pub fn logistic_gradient(model: &LinearModel, data: &TabularDataset, l2: f64) -> (Vec<f64>, f64) {
    let n = data.len() as f64;
    let mut gw = vec![0.0; model.w.len()];
    let mut gb = 0.0;
    for (x, &y) in data.rows().zip(data.labels()) {
        let r = sigmoid(model.score(x)) - f64::from(y);
        for (g, xi) in gw.iter_mut().zip(x) {
            *g += r * xi;
        }
        gb += r;
    }
    for (g, w) in gw.iter_mut().zip(&model.w) {
        *g = *g / n + l2 * w;
    }
    (gw, gb / n)
}

/// Lipschitz constant of the gradient: `λmax(XᵀX / n) / 4 + l2` on the
/// intercept-augmented design.
fn smoothness(data: &TabularDataset, l2: f64) -> f64 {
    let d = data.n_features() + 1;
    let mut m = DMatrix::<f64>::zeros(d, d);
    for x in data.rows() {
        for i in 0..d {
            let xi = if i < d - 1 { x[i] } else { 1.0 };
            for j in i..d {
                let xj = if j < d - 1 { x[j] } else { 1.0 };
                m[(i, j)] += xi * xj;
            }
        }
    }
    let n = data.len() as f64;
    for i in 0..d {
        for j in i..d {
            let v = m[(i, j)] / n;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let lmax = SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max);
    0.25 * lmax + l2
}

/// Full-batch gradient descent with step `1/L`. The seed only drives the
/// small random initialisation.
pub fn train_logreg(data: &TabularDataset, params: &LogregParams, seed: u64) -> Result<LinearModel> {
    train_logreg_traced(data, params, seed).map(|(m, _)| m)
}

/// As [`train_logreg`], also returning the training loss before every epoch
/// and after the last one.
pub fn train_logreg_traced(
    data: &TabularDataset,
    params: &LogregParams,
    seed: u64,
) -> Result<(LinearModel, Vec<f64>)> {
    require_both_classes(data)?;
    if !(params.l2 >= 0.0 && params.l2.is_finite()) {
        return Err(Error::InvalidParameter(format!("l2 = {}", params.l2)));
    }
    let step = 1.0 / smoothness(data, params.l2);
    let mut rng = rng_from_seed(seed);
    let init = Normal::new(0.0, 1e-2).expect("valid normal");
    let mut model = LinearModel {
        w: (0..data.n_features()).map(|_| init.sample(&mut rng)).collect(),
        b: 0.0,
    };
    let mut losses = vec![logistic_loss(&model, data, params.l2)];
    for _ in 0..params.epochs {
        let (gw, gb) = logistic_gradient(&model, data, params.l2);
        let gnorm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        if gnorm < params.grad_tol {
            break;
        }
        for (w, g) in model.w.iter_mut().zip(&gw) {
            *w -= step * g;
        }
        model.b -= step * gb;
        losses.push(logistic_loss(&model, data, params.l2));
    }
    Ok((model, losses))
}
