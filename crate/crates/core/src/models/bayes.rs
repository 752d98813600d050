use crate::data::DiscreteDistribution;
use crate::error::{Error, Result};

/// Argmax classifier over a finite feature alphabet.
///
/// Holds the true conditional `P(y=1|x)` and a working table `P'` at
/// total-variation distance at most `epsilon` from it. Predictions use `P'`;
/// a conditional of exactly 0.5 predicts 1. Atoms without mass carry 0.5.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBayes {
    truth: Vec<f64>,
    working: Vec<f64>,
    epsilon: f64,
}

const TV_TOL: f64 = 1e-12;

impl DiscreteBayes {
    /// Exact Bayes classifier of `dist` (`epsilon = 0`).
    pub fn from_distribution(dist: &DiscreteDistribution) -> Self {
        let truth: Vec<f64> = (0..dist.n_atoms())
            .map(|x| dist.p_y1_given_x(x).unwrap_or(0.5))
            .collect();
        Self {
            working: truth.clone(),
            truth,
            epsilon: 0.0,
        }
    }

    /// Replace the working table. For binary labels the total-variation
    /// distance per atom is `|p' - p|`.
    pub fn with_perturbation(mut self, perturbed: Vec<f64>, epsilon: f64) -> Result<Self> {
        if perturbed.len() != self.truth.len() {
            return Err(Error::DimensionMismatch {
                expected: self.truth.len(),
                got: perturbed.len(),
            });
        }
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon {epsilon} outside [0, 1)")));
        }
        for (x, (&p, &q)) in self.truth.iter().zip(&perturbed).enumerate() {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidParameter(format!("P'(1|{x}) = {q}")));
            }
            if (p - q).abs() > epsilon + TV_TOL {
                return Err(Error::InvalidParameter(format!(
                    "atom {x}: |P' - P| = {} exceeds epsilon {epsilon}",
                    (p - q).abs()
                )));
            }
        }
        self.working = perturbed;
        self.epsilon = epsilon;
        Ok(self)
    }

    /// Worst-case `epsilon`-suboptimal table: every conditional pushed
    /// `epsilon` towards the opposite label.
    pub fn adversarial(dist: &DiscreteDistribution, epsilon: f64) -> Result<Self> {
        let base = Self::from_distribution(dist);
        let perturbed = base
            .truth
            .iter()
            .map(|&p| if p >= 0.5 { (p - epsilon).max(0.0) } else { (p + epsilon).min(1.0) })
            .collect();
        base.with_perturbation(perturbed, epsilon)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_atoms(&self) -> usize {
        self.truth.len()
    }

    /// `P'(y = 1 | x)`.
    pub fn conditional(&self, x: usize) -> Result<f64> {
        self.working.get(x).copied().ok_or(Error::UnknownAtom(x))
    }

    pub fn classify(&self, x: usize) -> Result<u8> {
        self.conditional(x).map(|p| u8::from(p >= 0.5))
    }

    /// Labels for every atom.
    pub fn labels(&self) -> Vec<u8> {
        self.working.iter().map(|&p| u8::from(p >= 0.5)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p1: &[f64]) -> DiscreteDistribution {
        let w = 1.0 / p1.len() as f64;
        DiscreteDistribution::new(p1.iter().map(|&p| [[w * (1.0 - p), w * p], [0.0, 0.0]]).collect()).unwrap()
    }

    #[test]
    fn argmax_and_tie() {
        let b = DiscreteBayes::from_distribution(&dist(&[0.7, 0.5, 0.2]));
        assert_eq!(b.labels(), vec![1, 1, 0]);
        assert!(matches!(b.classify(3), Err(Error::UnknownAtom(3))));
    }

    #[test]
    fn perturbation_flips_prediction() {
        let d = dist(&[0.55]);
        let base = DiscreteBayes::from_distribution(&d);
        assert_eq!(base.classify(0).unwrap(), 1);
        let flipped = base.clone().with_perturbation(vec![0.35], 0.2).unwrap();
        assert_eq!(flipped.classify(0).unwrap(), 0);
        assert!(base.clone().with_perturbation(vec![0.3], 0.2).is_err());
        assert_eq!(DiscreteBayes::adversarial(&d, 0.2).unwrap().classify(0).unwrap(), 0);
    }
}
