//! 1NN label transfer between two symmetric Gaussian class pairs.
//!
//! References are drawn as `x ~ N(yμ, Σ)` and queries as
//! `x ~ N(yμ_min, Σ_min)`, `y = ±1` with equal probability. As the number of
//! references grows the 1NN label of a query follows the reference class of
//! higher density, which gives error `1 - Φ(vᵀμ_min / sqrt(vᵀΣ_min v))` with
//! `v = Σ⁻¹μ`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::models::KnnIndex;
use crate::rng::rng_from_seed;

/// Standard normal CDF through the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPairParams {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub mu_min: Vec<f64>,
    pub sigma_min: Vec<Vec<f64>>,
}

fn matrix(rows: &[Vec<f64>], d: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidParameter(format!("{name} must be {d}x{d}")));
    }
    let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
    for i in 0..d {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("{name} is not symmetric")));
            }
        }
    }
    Ok(m)
}

fn cholesky_l(m: &DMatrix<f64>, name: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Singular(format!("{name} is not positive definite")))
}

impl GaussianPairParams {
    /// Isotropic covariances `s·I` and `s_min·I`.
    pub fn isotropic(mu: Vec<f64>, s: f64, mu_min: Vec<f64>, s_min: f64) -> Self {
        let d = mu.len();
        let eye = |v: f64| (0..d).map(|i| (0..d).map(|j| if i == j { v } else { 0.0 }).collect()).collect();
        Self {
            sigma: eye(s),
            sigma_min: eye(s_min),
            mu,
            mu_min,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn matrices(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let d = self.dim();
        if d == 0 || self.mu_min.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: self.mu_min.len(),
            });
        }
        Ok((matrix(&self.sigma, d, "sigma")?, matrix(&self.sigma_min, d, "sigma_min")?))
    }

    pub fn validate(&self) -> Result<()> {
        let (s, sm) = self.matrices()?;
        cholesky_l(&s, "sigma")?;
        cholesky_l(&sm, "sigma_min")?;
        Ok(())
    }
}

fn ratio(num: f64, quad: f64) -> f64 {
    if quad <= 0.0 {
        0.0
    } else {
        num / quad.sqrt()
    }
}

/// `vᵀμ_min / sqrt(vᵀΣ_min v)` with `v = Σ⁻¹μ`.
pub fn snr(g: &GaussianPairParams) -> Result<f64> {
    let (s, sm) = g.matrices()?;
    cholesky_l(&sm, "sigma_min")?;
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Singular("sigma is not positive definite".into()))?;
    let mu = DVector::from_column_slice(&g.mu);
    let v = chol.solve(&mu);
    let mu_min = DVector::from_column_slice(&g.mu_min);
    if v.norm() == 0.0 {
        return Err(Error::InvalidParameter("mu must be non-zero".into()));
    }
    Ok(ratio(v.dot(&mu_min), (v.transpose() * &sm * &v)[(0, 0)]))
}

/// `1 - Φ(SNR)`.
pub fn asymptotic_1nn_error(g: &GaussianPairParams) -> Result<f64> {
    Ok(normal_cdf(-snr(g)?))
}

/// `I - wwᵀ/(wᵀw)` with `w = (μ - μ_min)/2`; the identity when `|w| < 1e-9`.
pub fn fair_projection(mu: &[f64], mu_min: &[f64]) -> Result<DMatrix<f64>> {
    if mu.len() != mu_min.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: mu_min.len(),
        });
    }
    let d = mu.len();
    let w = DVector::from_iterator(d, mu.iter().zip(mu_min).map(|(a, b)| 0.5 * (a - b)));
    let mut p = DMatrix::identity(d, d);
    let ww = w.dot(&w);
    if ww.sqrt() >= 1e-9 {
        p -= &w * w.transpose() / ww;
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub v: Vec<f64>,
    pub snr_raw: f64,
    pub snr_proj: f64,
    pub projection: Vec<Vec<f64>>,
    pub err_raw: f64,
    pub err_proj: f64,
    /// `Σ_min = I`, the regime in which the projection result is stated.
    pub sigma_min_is_identity: bool,
    pub projection_predicted_better: bool,
}

/// Raw and projected SNR. In the projected space the covariance `PΣP` is
/// singular, so `v̄ = (PΣP)⁺ Pμ` is taken with the pseudoinverse.
pub fn snr_report(g: &GaussianPairParams) -> Result<SnrReport> {
    let (s, sm) = g.matrices()?;
    let snr_raw = snr(g)?;
    let v = s
        .clone()
        .cholesky()
        .expect("checked in snr")
        .solve(&DVector::from_column_slice(&g.mu));
    let p = fair_projection(&g.mu, &g.mu_min)?;
    let mu_bar = &p * DVector::from_column_slice(&g.mu);
    let mu_min_bar = &p * DVector::from_column_slice(&g.mu_min);
    let s_bar = &p * &s * &p;
    let sm_bar = &p * &sm * &p;
    let scale = s_bar.norm().max(1.0);
    let pinv = s_bar
        .pseudo_inverse(1e-10 * scale)
        .map_err(|e| Error::Singular(e.to_string()))?;
    let v_bar = pinv * &mu_bar;
    let snr_proj = ratio(v_bar.dot(&mu_min_bar), (v_bar.transpose() * &sm_bar * &v_bar)[(0, 0)]);
    let d = g.dim();
    let identity = DMatrix::<f64>::identity(d, d);
    let err_raw = normal_cdf(-snr_raw);
    let err_proj = normal_cdf(-snr_proj);
    Ok(SnrReport {
        v: v.iter().copied().collect(),
        snr_raw,
        snr_proj,
        projection: (0..d).map(|i| (0..d).map(|j| p[(i, j)]).collect()).collect(),
        err_raw,
        err_proj,
        sigma_min_is_identity: (&sm - identity).abs().max() < 1e-12,
        projection_predicted_better: err_proj < err_raw,
    })
}

/// Monte-Carlo 1NN error: `n_ref` references and `n_query` queries, each
/// split evenly between the two classes, optionally mapped through a
/// projection first.
pub fn empirical_1nn_error(
    g: &GaussianPairParams,
    n_ref: usize,
    n_query: usize,
    seed: u64,
    projection: Option<&DMatrix<f64>>,
) -> Result<f64> {
    let (s, sm) = g.matrices()?;
    let l = cholesky_l(&s, "sigma")?;
    let lm = cholesky_l(&sm, "sigma_min")?;
    if n_ref < 2 || n_query == 0 {
        return Err(Error::InvalidParameter("need at least two references and one query".into()));
    }
    let d = g.dim();
    let mut rng = rng_from_seed(seed);
    let mut draw = |n: usize, mean: &[f64], chol: &DMatrix<f64>| {
        let mut pts = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let mut x = chol * z;
            for k in 0..d {
                x[k] += y * mean[k];
            }
            if let Some(p) = projection {
                x = p * x;
            }
            pts.extend(x.iter());
            labels.push(u8::from(y > 0.0));
        }
        (pts, labels)
    };
    let (ref_pts, ref_labels) = draw(n_ref, &g.mu, &l);
    let (q_pts, q_labels) = draw(n_query, &g.mu_min, &lm);
    let index = KnnIndex::new(ref_pts, d, ref_labels, 1)?;
    let (pred, _) = index.label_all(&q_pts)?;
    let wrong = pred.iter().zip(&q_labels).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / n_query as f64)
}
