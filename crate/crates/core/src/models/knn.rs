use crate::data::TabularDataset;
use crate::error::{Error, Result};

/// Brute-force Euclidean k-nearest-neighbour labeler.
///
/// Equal distances favour the lower reference index; an even vote favours
/// label 1. Confidence is the winning label's share of the `k` votes.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnIndex {
    points: Vec<f64>,
    d: usize,
    labels: Vec<u8>,
    k: usize,
}

impl KnnIndex {
    pub fn new(points: Vec<f64>, d: usize, labels: Vec<u8>, k: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("k-NN index has no references".into()));
        }
        if points.len() != labels.len() * d {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * d,
                got: points.len(),
            });
        }
        if k == 0 || k > labels.len() {
            return Err(Error::InvalidParameter(format!(
                "k = {k} with {} references",
                labels.len()
            )));
        }
        Ok(Self { points, d, labels, k })
    }

    pub fn from_dataset(data: &TabularDataset, k: usize) -> Result<Self> {
        Self::new(data.features().to_vec(), data.n_features(), data.labels().to_vec(), k)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Indices of the `k` nearest references, closest first.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<usize>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        // Sorted (distance, index) buffer of length <= k.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, p) in self.points.chunks_exact(self.d.max(1)).enumerate().take(self.len()) {
            let dist: f64 = if self.d == 0 {
                0.0
            } else {
                p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
            };
            if best.len() == self.k && dist >= best[self.k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= dist);
            best.insert(pos, (dist, i));
            best.truncate(self.k);
        }
        Ok(best.into_iter().map(|(_, i)| i).collect())
    }

    /// `(label, confidence)` for one query.
    pub fn label(&self, x: &[f64]) -> Result<(u8, f64)> {
        let nn = self.neighbors(x)?;
        let ones = nn.iter().filter(|&&i| self.labels[i] == 1).count();
        let zeros = nn.len() - ones;
        let k = nn.len() as f64;
        Ok(if ones >= zeros {
            (1, ones as f64 / k)
        } else {
            (0, zeros as f64 / k)
        })
    }

    /// Label every row of a flat row-major buffer.
    pub fn label_all(&self, queries: &[f64]) -> Result<(Vec<u8>, Vec<f64>)> {
        if self.d == 0 || queries.len() % self.d != 0 {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: queries.len(),
            });
        }
        let mut labels = Vec::with_capacity(queries.len() / self.d);
        let mut conf = Vec::with_capacity(queries.len() / self.d);
        for q in queries.chunks_exact(self.d) {
            let (l, c) = self.label(q)?;
            labels.push(l);
            conf.push(c);
        }
        Ok((labels, conf))
    }
}
