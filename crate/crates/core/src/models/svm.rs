//! Linear soft-margin SVM.
//!
//! Minimises `λ/2·|w|² + mean hinge(y·(w·x + b))` through its dual
//! (`C = 1/(nλ)`, unpenalised intercept) with sequential minimal
//! optimisation using second-order working-pair selection. Large problems
//! are solved on a growing working set: start from the rows nearest the
//! class-mean bisector, solve, add the rows that violate the margin, repeat
//! until none do. The result is the exact optimum up to `tol`.

use serde::{Deserialize, Serialize};

use super::{require_both_classes, LinearModel};
use crate::data::TabularDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub lambda: f64,
    /// Stopping tolerance on the maximal KKT violation, in margin units.
    pub tol: f64,
    /// Cap on pair updates across the whole solve.
    pub max_updates: usize,
    /// Working-set rows seeded per class.
    pub initial_per_class: usize,
    /// Violators added per outer round.
    pub grow_by: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 1e-6,
            tol: 1e-6,
            max_updates: 20_000_000,
            initial_per_class: 64,
            grow_by: 256,
        }
    }
}

struct Problem<'a> {
    x: &'a [f64],
    d: usize,
    y: Vec<f64>,
    c: f64,
}

impl Problem<'_> {
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    fn dot_w(&self, w: &[f64], i: usize) -> f64 {
        self.row(i).iter().zip(w).map(|(a, b)| a * b).sum()
    }
}


/// SMO restricted to `set`. Rows outside the set keep `alpha = 0`. Returns
/// the intercept and the number of updates spent.
fn smo(
    p: &Problem,
    set: &[usize],
    alpha: &mut [f64],
    w: &mut [f64],
    norms: &[f64],
    tol: f64,
    budget: usize,
) -> (f64, usize) {
    const TAU: f64 = 1e-12;
    let c = p.c;
    // grad[k] = y_k w·x_k - 1 for k in the set.
    let mut grad: Vec<f64> = set.iter().map(|&i| p.y[i] * p.dot_w(w, i) - 1.0).collect();
    let mut updates = 0;
    loop {
        let in_up = |k: usize| {
            let i = set[k];
            (p.y[i] > 0.0 && alpha[i] < c) || (p.y[i] < 0.0 && alpha[i] > 0.0)
        };
        let in_low = |k: usize| {
            let i = set[k];
            (p.y[i] < 0.0 && alpha[i] < c) || (p.y[i] > 0.0 && alpha[i] > 0.0)
        };
        let mut i_best = usize::MAX;
        let mut m_up = f64::NEG_INFINITY;
        for k in 0..set.len() {
            if in_up(k) {
                let v = -p.y[set[k]] * grad[k];
                if v > m_up {
                    m_up = v;
                    i_best = k;
                }
            }
        }
        let mut m_low = f64::INFINITY;
        let mut j_best = usize::MAX;
        let mut best_obj = f64::INFINITY;
        if i_best != usize::MAX {
            let xi = p.row(set[i_best]);
            for k in 0..set.len() {
                if !in_low(k) {
                    continue;
                }
                let v = -p.y[set[k]] * grad[k];
                m_low = m_low.min(v);
                let b = m_up - v;
                if b > 0.0 {
                    let t = set[k];
                    let kit: f64 = xi.iter().zip(p.row(t)).map(|(a, b)| a * b).sum();
                    let mut a = norms[set[i_best]] + norms[t] - 2.0 * kit;
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -b * b / a;
                    if obj < best_obj {
                        best_obj = obj;
                        j_best = k;
                    }
                }
            }
        }
        if i_best == usize::MAX || j_best == usize::MAX || m_up - m_low < tol || updates >= budget {
            // Intercept: mean over free vectors, else midpoint of the feasible interval.
            let mut sum = 0.0;
            let mut count = 0usize;
            for (k, &i) in set.iter().enumerate() {
                if alpha[i] > 0.0 && alpha[i] < c {
                    sum += -p.y[i] * grad[k];
                    count += 1;
                }
            }
            let b = if count > 0 {
                sum / count as f64
            } else if m_up.is_finite() && m_low.is_finite() {
                0.5 * (m_up + m_low)
            } else if m_up.is_finite() {
                m_up
            } else {
                m_low
            };
            return (b, updates);
        }
        let (ki, kj) = (i_best, j_best);
        let (i, j) = (set[ki], set[kj]);
        let xi = p.row(i);
        let xj = p.row(j);
        let kij: f64 = xi.iter().zip(xj).map(|(a, b)| a * b).sum();
        let mut a = norms[i] + norms[j] - 2.0 * kij;
        if a <= 0.0 {
            a = TAU;
        }
        let b = -p.y[i] * grad[ki] + p.y[j] * grad[kj];
        // Move along d_i = y_i, d_j = -y_j, which keeps sum(alpha·y) fixed.
        let mut t = b / a;
        t = t.min(if p.y[i] > 0.0 { c - alpha[i] } else { alpha[i] });
        t = t.min(if p.y[j] > 0.0 { alpha[j] } else { c - alpha[j] });
        t = t.max(0.0);
        alpha[i] = (alpha[i] + t * p.y[i]).clamp(0.0, c);
        alpha[j] = (alpha[j] - t * p.y[j]).clamp(0.0, c);
        let delta: Vec<f64> = xi.iter().zip(xj).map(|(a, b)| t * (a - b)).collect();
        for (wk, dk) in w.iter_mut().zip(&delta) {
            *wk += dk;
        }
        for (k, &r) in set.iter().enumerate() {
            let dot: f64 = p.row(r).iter().zip(&delta).map(|(a, b)| a * b).sum();
            grad[k] += p.y[r] * dot;
        }
        updates += 1;
    }
}

pub fn train_linear_svm(data: &TabularDataset, params: &SvmParams) -> Result<LinearModel> {
    require_both_classes(data)?;
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda = {}", params.lambda)));
    }
    if !(params.tol > 0.0) || params.initial_per_class == 0 || params.grow_by == 0 {
        return Err(Error::InvalidParameter("invalid SVM solver settings".into()));
    }
    let n = data.len();
    let d = data.n_features();
    let p = Problem {
        x: data.features(),
        d,
        y: data.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect(),
        c: 1.0 / (n as f64 * params.lambda),
    };
    let norms: Vec<f64> = (0..n).map(|i| p.row(i).iter().map(|v| v * v).sum()).collect();

    // Seed the working set with the rows closest to the bisector of the class means.
    let mut mean = [vec![0.0; d], vec![0.0; d]];
    let mut count = [0usize; 2];
    for i in 0..n {
        let c = usize::from(p.y[i] > 0.0);
        count[c] += 1;
        for (m, v) in mean[c].iter_mut().zip(p.row(i)) {
            *m += v;
        }
    }
    for c in 0..2 {
        mean[c].iter_mut().for_each(|m| *m /= count[c] as f64);
    }
    let dir: Vec<f64> = mean[1].iter().zip(&mean[0]).map(|(a, b)| a - b).collect();
    let mid: Vec<f64> = mean[1].iter().zip(&mean[0]).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut in_set = vec![false; n];
    let mut set = Vec::new();
    for cls in [-1.0, 1.0] {
        let mut scored: Vec<(f64, usize)> = (0..n)
            .filter(|&i| p.y[i] == cls)
            .map(|i| {
                let s: f64 = p.row(i).iter().zip(&mid).zip(&dir).map(|((x, m), u)| (x - m) * u).sum();
                (cls * s, i)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in scored.iter().take(params.initial_per_class) {
            in_set[i] = true;
            set.push(i);
        }
    }

    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d];
    let mut spent = 0;
    loop {
        set.sort_unstable();
        let (b, used) = smo(&p, &set, &mut alpha, &mut w, &norms, params.tol, params.max_updates - spent);
        spent += used;
        let mut violators: Vec<(f64, usize)> = (0..n)
            .filter(|&i| !in_set[i])
            .filter_map(|i| {
                let margin = p.y[i] * (p.dot_w(&w, i) + b);
                (margin < 1.0 - params.tol).then_some((margin, i))
            })
            .collect();
        if violators.is_empty() || spent >= params.max_updates {
            return LinearModel::new(w, b);
        }
        violators.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in violators.iter().take(params.grow_by) {
            in_set[i] = true;
            set.push(i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
    }

    #[test]
    fn two_points() {
        let d = TabularDataset::from_rows(&[vec![-1.0, 0.0], vec![1.0, 0.0]], vec![0, 1], vec![0, 0]).unwrap();
        let m = train_linear_svm(&d, &SvmParams::default()).unwrap();
        assert!(angle_deg(&m.w, &[1.0, 0.0]) < 1e-6);
        assert!(m.b.abs() < 1e-6);
        // Hard margin: w = (1, 0).
        assert!((m.w[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn four_corners() {
        let rows = vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]];
        let d = TabularDataset::from_rows(&rows, vec![1, 1, 0, 0], vec![0; 4]).unwrap();
        let m = train_linear_svm(&d, &SvmParams::default()).unwrap();
        assert!(angle_deg(&m.w, &[1.0, 0.0]) < 1e-6);
    }

    #[test]
    fn margin_points_are_tight() {
        // Known hard-margin solution: support vectors at (0,1)→1 and (0,-1)→0,
        // extra points further out on both sides.
        let rows = vec![
            vec![0.0, 1.0],
            vec![2.0, 3.0],
            vec![-1.0, 4.0],
            vec![0.0, -1.0],
            vec![1.0, -5.0],
            vec![-3.0, -2.0],
        ];
        let d = TabularDataset::from_rows(&rows, vec![1, 1, 1, 0, 0, 0], vec![0; 6]).unwrap();
        let m = train_linear_svm(&d, &SvmParams::default()).unwrap();
        assert!((m.w[0]).abs() < 1e-6 && (m.w[1] - 1.0).abs() < 1e-6, "{m:?}");
    }
}
