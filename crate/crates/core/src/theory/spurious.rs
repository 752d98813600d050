use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{sample_gmm4, Gmm4Params, TabularDataset, MINORITY};
use crate::error::Result;
use crate::metrics::equalized_odds;
use crate::models::{train_linear_svm, Classifier, LinearModel, SvmParams};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// How the minority's training labels are rewritten before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelabelPolicy {
    None,
    FlipAll,
    /// Every minority label replaced by a fair coin.
    Random,
    /// The coin relabeling, out of a seeded batch, whose learned direction
    /// is furthest from `μ + ψ`.
    AdversarialWorst,
}

impl RelabelPolicy {
    pub const ALL: [RelabelPolicy; 4] = [
        RelabelPolicy::None,
        RelabelPolicy::FlipAll,
        RelabelPolicy::Random,
        RelabelPolicy::AdversarialWorst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelabelPolicy::None => "none",
            RelabelPolicy::FlipAll => "flip_all",
            RelabelPolicy::Random => "random",
            RelabelPolicy::AdversarialWorst => "adversarial_worst",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpuriousConfig {
    pub svm: SvmParams,
    /// Rows per group in the fresh evaluation sample.
    pub test_per_group: usize,
    pub adversarial_trials: usize,
}

impl Default for SpuriousConfig {
    fn default() -> Self {
        Self {
            svm: SvmParams::default(),
            test_per_group: 10_000,
            adversarial_trials: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpuriousOutcome {
    pub policy: RelabelPolicy,
    pub seed: u64,
    pub angle_deg: f64,
    pub eqod: f64,
    pub w: Vec<f64>,
    pub b: f64,
}

pub fn angle_between_deg(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 90.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
}

fn coin_relabel(train: &TabularDataset, seed: u64) -> Result<TabularDataset> {
    let mut rng = rng_from_seed(seed);
    let labels = train
        .labels()
        .iter()
        .zip(train.attribute())
        .map(|(&y, &a)| if a == MINORITY { u8::from(rng.random::<f64>() < 0.5) } else { y })
        .collect();
    train.with_labels(labels)
}

/// Sample the mixture, relabel the minority per `policy`, fit the max-margin
/// learner and report its angle to `μ + ψ` and its equalized-odds gap on a
/// fresh sample with `test_per_group` rows per group.
pub fn spurious_direction_experiment(
    params: &Gmm4Params,
    policy: RelabelPolicy,
    cfg: &SpuriousConfig,
    seed: u64,
) -> Result<SpuriousOutcome> {
    params.validate()?;
    let spurious: Vec<f64> = params.mu.iter().zip(&params.psi).map(|(a, b)| a + b).collect();
    let train = sample_gmm4(params, derive_seed(seed, stream::SAMPLE))?;
    let relabel_seed = derive_seed(seed, stream::PLAN);
    let model: LinearModel = match policy {
        RelabelPolicy::None => train_linear_svm(&train, &cfg.svm)?,
        RelabelPolicy::FlipAll => {
            let labels = train
                .labels()
                .iter()
                .zip(train.attribute())
                .map(|(&y, &a)| if a == MINORITY { 1 - y } else { y })
                .collect();
            train_linear_svm(&train.with_labels(labels)?, &cfg.svm)?
        }
        RelabelPolicy::Random => train_linear_svm(&coin_relabel(&train, relabel_seed)?, &cfg.svm)?,
        RelabelPolicy::AdversarialWorst => {
            let mut worst: Option<(f64, LinearModel)> = None;
            for t in 0..cfg.adversarial_trials.max(1) {
                let relabeled = coin_relabel(&train, derive_seed(relabel_seed, t as u64 + 1))?;
                let m = train_linear_svm(&relabeled, &cfg.svm)?;
                let angle = angle_between_deg(&m.w, &spurious);
                if worst.as_ref().is_none_or(|(a, _)| angle > *a) {
                    worst = Some((angle, m));
                }
            }
            worst.expect("at least one trial").1
        }
    };
    let test_params = Gmm4Params {
        n_major: cfg.test_per_group,
        n_minor: cfg.test_per_group,
        ..params.clone()
    };
    let test = sample_gmm4(&test_params, derive_seed(seed, stream::TEST_SAMPLE))?;
    let pred = model.predict(&test)?;
    Ok(SpuriousOutcome {
        policy,
        seed,
        angle_deg: angle_between_deg(&model.w, &spurious),
        eqod: equalized_odds(&pred, test.labels(), test.attribute())?,
        w: model.w,
        b: model.b,
    })
}
