use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::TabularDataset;
use crate::error::{Error, Result};

/// Fitted principal-component projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    pub mean: Vec<f64>,
    /// Unit eigenvectors, one per kept component, in descending eigenvalue order.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the sample covariance (denominator `n - 1`), all `d` of them.
    pub eigenvalues: Vec<f64>,
    /// Per kept component, eigenvalue over total variance (0 for constant data).
    pub explained_variance_ratio: Vec<f64>,
}

/// Dense symmetric eigendecomposition of the centered covariance.
pub fn pca_fit(data: &TabularDataset, n_components: usize) -> Result<PcaTransform> {
    let n = data.len();
    let d = data.n_features();
    if n < 2 {
        return Err(Error::InvalidParameter("PCA needs at least two rows".into()));
    }
    if n_components > d {
        return Err(Error::InvalidParameter(format!(
            "{n_components} components requested from {d} features"
        )));
    }
    let mut mean = vec![0.0; d];
    for row in data.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in data.rows() {
        for k in 0..d {
            centered[k] = row[k] - mean[k];
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    // Round-off can leave tiny negative eigenvalues on singular covariances.
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let components = order[..n_components]
        .iter()
        .map(|&i| {
            let mut c: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // Sign convention: largest-magnitude entry positive.
            let pivot = c
                .iter()
                .copied()
                .fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
            if pivot < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
            }
            c
        })
        .collect();
    let explained_variance_ratio = eigenvalues[..n_components]
        .iter()
        .map(|&l| if total > 0.0 { l / total } else { 0.0 })
        .collect();
    Ok(PcaTransform {
        mean,
        components,
        eigenvalues,
        explained_variance_ratio,
    })
}

impl PcaTransform {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(ci, (xi, mi))| ci * (xi - mi))
                    .sum()
            })
            .collect())
    }

    /// Mean-centre then project every row onto the kept components.
    pub fn transform(&self, data: &TabularDataset) -> Result<TabularDataset> {
        if data.n_features() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: data.n_features(),
            });
        }
        data.map_features(self.n_components(), |row| {
            self.project(row).expect("dimension checked above")
        })
    }

    /// Map component scores back to the centred input space.
    pub fn reconstruct_centered(&self, scores: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mean.len()];
        for (s, c) in scores.iter().zip(&self.components) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += s * ci;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, StandardNormal};

    fn dataset(rows: Vec<Vec<f64>>) -> TabularDataset {
        let n = rows.len();
        TabularDataset::from_rows(&rows, vec![0; n], vec![0; n]).unwrap()
    }

    #[test]
    fn axis_aligned_variances() {
        // Columns with sample variances 4 and 1, uncorrelated.
        let rows = vec![
            vec![2.0, 1.0],
            vec![-2.0, 1.0],
            vec![2.0, -1.0],
            vec![-2.0, -1.0],
        ];
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v * (3.0f64 / 4.0).sqrt()).collect())
            .collect();
        let t = pca_fit(&dataset(scaled), 2).unwrap();
        assert!((t.eigenvalues[0] - 4.0).abs() < 1e-12);
        assert!((t.eigenvalues[1] - 1.0).abs() < 1e-12);
        assert!((t.components[0][0].abs() - 1.0).abs() < 1e-12);
        assert!((t.explained_variance_ratio[0] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn full_rank_reconstruction() {
        let mut rng = rng_from_seed(1);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..4).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let data = dataset(rows);
        let t = pca_fit(&data, 4).unwrap();
        for row in data.rows() {
            let back = t.reconstruct_centered(&t.project(row).unwrap());
            for k in 0..4 {
                assert!((back[k] - (row[k] - t.mean[k])).abs() < 1e-8);
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                let dot: f64 = t.components[i].iter().zip(&t.components[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_data_has_zero_ratios() {
        let t = pca_fit(&dataset(vec![vec![1.0, 2.0]; 5]), 2).unwrap();
        assert_eq!(t.explained_variance_ratio, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_too_many_components() {
        assert!(pca_fit(&dataset(vec![vec![1.0], vec![2.0]]), 2).is_err());
        assert!(pca_fit(&dataset(vec![vec![1.0]]), 1).is_err());
    }

    #[test]
    fn transform_width() {
        let t = pca_fit(&dataset(vec![vec![1.0, 0.0, 2.0], vec![0.0, 1.0, 3.0], vec![2.0, 2.0, 0.0]]), 2).unwrap();
        let out = t.transform(&dataset(vec![vec![0.0, 0.0, 0.0]])).unwrap();
        assert_eq!(out.n_features(), 2);
    }
}
