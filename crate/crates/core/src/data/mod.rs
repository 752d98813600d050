//! Tabular datasets, ingestion, synthetic generators and PCA.
//!
//! Attribute convention: `1` marks the minority / protected group everywhere
//! in the crate, `0` the majority.

mod causal;
mod gmm4;
mod loader;
mod pca;

pub use causal::{
    enumerate_causal, AtomMap, CausalModelSpec, CoupledAtom, Coupling, DiscreteDistribution,
};
pub use gmm4::{counterfactual_gmm4, sample_gmm4, Gmm4Params};
pub use loader::{load_csv, load_csv_reader, DatasetSchema};
pub use pca::{pca_fit, PcaTransform};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const MAJORITY: u8 = 0;
pub const MINORITY: u8 = 1;

/// Feature matrix with binary labels and a binary protected attribute.
///
/// Immutable once built; every transformation returns a new dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<u8>,
    attribute: Vec<u8>,
    column_names: Option<Vec<String>>,
}

impl TabularDataset {
    /// Build from a row-major feature buffer.
    pub fn from_flat(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<u8>,
        attribute: Vec<u8>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::EmptyInput("dataset has no rows".into()));
        }
        if attribute.len() != n {
            return Err(Error::InvalidData(format!(
                "{} labels but {} attribute values",
                n,
                attribute.len()
            )));
        }
        if features.len() != n * n_features {
            return Err(Error::InvalidData(format!(
                "feature buffer has {} entries, expected {} x {}",
                features.len(),
                n,
                n_features
            )));
        }
        if let Some(i) = labels.iter().position(|&v| v > 1) {
            return Err(Error::InvalidData(format!("label at row {i} is not 0/1")));
        }
        if let Some(i) = attribute.iter().position(|&v| v > 1) {
            return Err(Error::InvalidData(format!("attribute at row {i} is not 0/1")));
        }
        if let Some(k) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite feature at row {} column {}",
                k / n_features.max(1),
                k % n_features.max(1)
            )));
        }
        Ok(Self {
            features,
            n_features,
            labels,
            attribute,
            column_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>, attribute: Vec<u8>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: rows[i].len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidData(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        Self::from_flat(rows.concat(), d, labels, attribute)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: names.len(),
            });
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn attribute(&self) -> &[u8] {
        &self.attribute
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn indices_of_group(&self, group: u8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.attribute[i] == group).collect()
    }

    pub fn minority_indices(&self) -> Vec<usize> {
        self.indices_of_group(MINORITY)
    }

    pub fn majority_indices(&self) -> Vec<usize> {
        self.indices_of_group(MAJORITY)
    }

    pub fn has_both_classes(&self) -> bool {
        self.labels.contains(&0) && self.labels.contains(&1)
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidParameter(format!(
                "row index {bad} out of bounds for {} rows",
                self.len()
            )));
        }
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let mut out = Self::from_flat(
            features,
            self.n_features,
            indices.iter().map(|&i| self.labels[i]).collect(),
            indices.iter().map(|&i| self.attribute[i]).collect(),
        )?;
        out.column_names = self.column_names.clone();
        Ok(out)
    }

    /// Same features and attribute with a replacement label vector.
    pub fn with_labels(&self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: labels.len(),
            });
        }
        if let Some(i) = labels.iter().position(|&v| v > 1) {
            return Err(Error::InvalidData(format!("label at row {i} is not 0/1")));
        }
        let mut out = self.clone();
        out.labels = labels;
        Ok(out)
    }

    /// Apply a row-wise feature map producing `out_dim` columns.
    pub fn map_features(&self, out_dim: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut features = Vec::with_capacity(self.len() * out_dim);
        for row in self.rows() {
            let mapped = f(row);
            if mapped.len() != out_dim {
                return Err(Error::DimensionMismatch {
                    expected: out_dim,
                    got: mapped.len(),
                });
            }
            features.extend(mapped);
        }
        Self::from_flat(
            features,
            out_dim,
            self.labels.clone(),
            self.attribute.clone(),
        )
    }

    /// FNV-1a digest over the raw feature bits.
    pub fn feature_digest(&self) -> u64 {
        fnv1a(self.features.iter().flat_map(|v| v.to_bits().to_le_bytes()))
    }

    /// FNV-1a digest over features, labels and attribute.
    pub fn content_digest(&self) -> u64 {
        let bytes = self
            .features
            .iter()
            .flat_map(|v| v.to_bits().to_le_bytes())
            .chain(self.labels.iter().copied())
            .chain(self.attribute.iter().copied());
        fnv1a(bytes)
    }
}

fn fnv1a(bytes: impl Iterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Shuffled train/test row indices, each sorted ascending.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n} rows into two non-empty parts"
        )));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Seeded train/test split. Rows keep their original relative order.
pub fn split(
    data: &TabularDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(TabularDataset, TabularDataset)> {
    let (train, test) = split_indices(data.len(), test_fraction, seed)?;
    Ok((data.select(&train)?, data.select(&test)?))
}

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
