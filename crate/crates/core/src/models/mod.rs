//! Learners used by the firm and by the collective.
//!
//! Tie rules shared by every model: a score exactly on the decision
//! threshold (probability 0.5, linear score 0) predicts label 1; equal
//! distances favour the lower reference index.

mod bayes;
mod gbt;
mod knn;
mod linear;
mod svm;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bayes::DiscreteBayes;
pub use gbt::{train_gbt, train_gbt_traced, GbtModel, GbtParams, Tree, TreeNode};
pub use knn::KnnIndex;
pub use linear::{
    logistic_gradient, logistic_loss, train_logreg, train_logreg_traced, LinearModel, LogregParams,
};
pub use svm::{train_linear_svm, SvmParams};

use crate::data::TabularDataset;
use crate::error::{Error, Result};

/// A trained binary classifier with a probability for label 1.
pub trait Classifier: Send + Sync {
    fn n_features(&self) -> usize;

    /// `P(y = 1 | x)` for one row. Callers check the dimension.
    fn proba_row(&self, x: &[f64]) -> f64;

    fn predict_row(&self, x: &[f64]) -> u8 {
        u8::from(self.proba_row(x) >= 0.5)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: d,
            });
        }
        Ok(())
    }

    fn predict(&self, data: &TabularDataset) -> Result<Vec<u8>> {
        self.check_dim(data.n_features())?;
        Ok(data.rows().map(|r| self.predict_row(r)).collect())
    }

    fn predict_proba(&self, data: &TabularDataset) -> Result<Vec<f64>> {
        self.check_dim(data.n_features())?;
        Ok(data.rows().map(|r| self.proba_row(r)).collect())
    }

    /// Predict on a flat row-major buffer of width `n_features()`.
    fn predict_flat(&self, features: &[f64]) -> Result<Vec<u8>> {
        let d = self.n_features();
        if d == 0 || features.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: features.len(),
            });
        }
        Ok(features.chunks(d).map(|r| self.predict_row(r)).collect())
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn require_both_classes(data: &TabularDataset) -> Result<()> {
    if data.len() < 2 || !data.has_both_classes() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Serializable firm model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FirmModel {
    Linear(LinearModel),
    Gbt(GbtModel),
}

impl Classifier for FirmModel {
    fn n_features(&self) -> usize {
        match self {
            FirmModel::Linear(m) => m.n_features(),
            FirmModel::Gbt(m) => m.n_features(),
        }
    }

    fn proba_row(&self, x: &[f64]) -> f64 {
        match self {
            FirmModel::Linear(m) => m.proba_row(x),
            FirmModel::Gbt(m) => m.proba_row(x),
        }
    }

    fn predict_row(&self, x: &[f64]) -> u8 {
        match self {
            FirmModel::Linear(m) => m.predict_row(x),
            FirmModel::Gbt(m) => m.predict_row(x),
        }
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk wrapper: `{"format_version": 1, "model": {"kind": ..., ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: FirmModel,
}

impl ModelFile {
    pub fn new(model: FirmModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "model format version {} is not supported (expected {})",
                file.format_version, MODEL_FORMAT_VERSION
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}
