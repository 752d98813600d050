//! Finite causal models `A, U -> X -> Y` and their exact joint tables.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{TabularDataset, MAJORITY, MINORITY};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

const MASS_TOL: f64 = 1e-12;

/// A finite structural model.
///
/// The group `A` is drawn with `P(A = 1) = beta`, the latent `U` from
/// `u_probs`, the observed feature atom is `feature_map[u][a]`, and the
/// label follows `P(Y = 1 | X = x) = label_probs[x]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalModelSpec {
    pub beta: f64,
    pub u_probs: Vec<f64>,
    /// `feature_map[u] = [x when a = 0, x when a = 1]`.
    pub feature_map: Vec<[usize; 2]>,
    pub label_probs: Vec<f64>,
}

impl CausalModelSpec {
    pub fn n_atoms(&self) -> usize {
        self.label_probs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta {} outside [0, 1)",
                self.beta
            )));
        }
        if self.u_probs.is_empty() {
            return Err(Error::InvalidParameter("latent support is empty".into()));
        }
        if self.u_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(
                "latent probabilities must lie in [0, 1]".into(),
            ));
        }
        let total: f64 = self.u_probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidParameter(format!(
                "latent probabilities sum to {total}"
            )));
        }
        if self.feature_map.len() != self.u_probs.len() {
            return Err(Error::InvalidParameter(format!(
                "feature map covers {} latent values, expected {}",
                self.feature_map.len(),
                self.u_probs.len()
            )));
        }
        if let Some(x) = self
            .feature_map
            .iter()
            .flatten()
            .find(|&&x| x >= self.n_atoms())
        {
            return Err(Error::UnknownAtom(*x));
        }
        if self.label_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(
                "label probabilities must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn group_prob(&self, a: u8) -> f64 {
        if a == MINORITY {
            self.beta
        } else {
            1.0 - self.beta
        }
    }

    /// Draw `n` rows with one-hot atom features. Also returns the one-hot
    /// majority counterfactual `feature_map[u][0]` of every row (flat,
    /// row-major, same width).
    pub fn sample(&self, n: usize, seed: u64) -> Result<(TabularDataset, Vec<f64>)> {
        self.validate()?;
        let k = self.n_atoms();
        let mut rng = rng_from_seed(seed);
        let mut features = vec![0.0; n * k];
        let mut counterfactual = vec![0.0; n * k];
        let mut labels = Vec::with_capacity(n);
        let mut attribute = Vec::with_capacity(n);
        for i in 0..n {
            let a = u8::from(rng.random::<f64>() < self.beta);
            let draw: f64 = rng.random();
            let mut acc = 0.0;
            let mut u = self.u_probs.len() - 1;
            for (j, p) in self.u_probs.iter().enumerate() {
                acc += p;
                if draw < acc {
                    u = j;
                    break;
                }
            }
            let x = self.feature_map[u][a as usize];
            features[i * k + x] = 1.0;
            counterfactual[i * k + self.feature_map[u][0]] = 1.0;
            labels.push(u8::from(rng.random::<f64>() < self.label_probs[x]));
            attribute.push(a);
        }
        let names = (0..k).map(|x| format!("atom{x}")).collect();
        let data = TabularDataset::from_flat(features, k, labels, attribute)?.with_column_names(names)?;
        Ok((data, counterfactual))
    }
}

/// Exact joint table `P(x, a, y)` over a finite feature alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    /// `mass[x][a][y]`.
    mass: Vec<[[f64; 2]; 2]>,
}

impl DiscreteDistribution {
    pub fn new(mass: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::EmptyInput("distribution has no atoms".into()));
        }
        let mut total = 0.0;
        for v in mass.iter().flatten().flatten() {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::InvalidParameter(format!("invalid mass {v}")));
            }
            total += v;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidParameter(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { mass })
    }

    pub fn n_atoms(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self, x: usize, a: u8, y: u8) -> f64 {
        self.mass[x][a as usize][y as usize]
    }

    pub fn masses(&self) -> &[[[f64; 2]; 2]] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().flatten().flatten().sum()
    }

    /// `P(x)`, summed over group and label.
    pub fn atom_mass(&self, x: usize) -> f64 {
        self.mass[x].iter().flatten().sum()
    }

    /// `P(x, a)`.
    pub fn atom_group_mass(&self, x: usize, a: u8) -> f64 {
        self.mass[x][a as usize].iter().sum()
    }

    /// `P(a)`.
    pub fn group_mass(&self, a: u8) -> f64 {
        self.mass.iter().map(|m| m[a as usize][0] + m[a as usize][1]).sum()
    }

    /// `P(x, y)` with the group marginalised out.
    pub fn joint_xy(&self, x: usize, y: u8) -> f64 {
        self.mass[x][0][y as usize] + self.mass[x][1][y as usize]
    }

    /// `P(Y = 1 | X = x)`, `None` for atoms of zero mass.
    pub fn p_y1_given_x(&self, x: usize) -> Option<f64> {
        let m = self.atom_mass(x);
        (m > 0.0).then(|| self.joint_xy(x, 1) / m)
    }

    /// `(1 - weight)·self + weight·other`.
    pub fn mix(&self, other: &Self, weight: f64) -> Result<Self> {
        if other.n_atoms() != self.n_atoms() {
            return Err(Error::DimensionMismatch {
                expected: self.n_atoms(),
                got: other.n_atoms(),
            });
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter(format!(
                "mixture weight {weight} outside [0, 1]"
            )));
        }
        let mut mass = self.mass.clone();
        for (m, o) in mass.iter_mut().zip(&other.mass) {
            for a in 0..2 {
                for y in 0..2 {
                    m[a][y] = (1.0 - weight) * m[a][y] + weight * o[a][y];
                }
            }
        }
        Self::new(mass)
    }
}

/// Enumerate the joint table of a causal model by summing over `(a, u)`.
pub fn enumerate_causal(spec: &CausalModelSpec) -> Result<DiscreteDistribution> {
    spec.validate()?;
    let mut mass = vec![[[0.0; 2]; 2]; spec.n_atoms()];
    for a in [MAJORITY, MINORITY] {
        for (u, pu) in spec.u_probs.iter().enumerate() {
            let x = spec.feature_map[u][a as usize];
            let w = spec.group_prob(a) * pu;
            let p1 = spec.label_probs[x];
            mass[x][a as usize][1] += w * p1;
            mass[x][a as usize][0] += w * (1.0 - p1);
        }
    }
    DiscreteDistribution::new(mass)
}

/// A deterministic map between feature atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomMap(pub Vec<usize>);

impl AtomMap {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn apply(&self, x: usize) -> Result<usize> {
        self.0.get(x).copied().ok_or(Error::UnknownAtom(x))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `g(g(x)) = g(x)` for every atom.
    pub fn is_idempotent(&self) -> bool {
        self.0
            .iter()
            .all(|&t| self.0.get(t).is_some_and(|&tt| tt == t))
    }
}

/// One unit of probability mass paired with its counterfactual atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledAtom {
    pub x: usize,
    pub a: u8,
    pub x_cf: usize,
    pub mass: f64,
}

/// Joint law of `(x, a, g(x))` under the base distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub pairs: Vec<CoupledAtom>,
}

impl Coupling {
    /// Majority counterfactual of every `(a, u)`: `x = f(a, u)`,
    /// `g(x) = f(0, u)`. Majority members map to themselves.
    pub fn erasure(spec: &CausalModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut pairs = Vec::with_capacity(2 * spec.u_probs.len());
        for a in [MAJORITY, MINORITY] {
            for (u, pu) in spec.u_probs.iter().enumerate() {
                pairs.push(CoupledAtom {
                    x: spec.feature_map[u][a as usize],
                    a,
                    x_cf: spec.feature_map[u][0],
                    mass: spec.group_prob(a) * pu,
                });
            }
        }
        Ok(Self { pairs })
    }

    /// Couple every `(x, a)` of `dist` with `g(x)`.
    pub fn from_map(dist: &DiscreteDistribution, g: &AtomMap) -> Result<Self> {
        if g.len() != dist.n_atoms() {
            return Err(Error::DimensionMismatch {
                expected: dist.n_atoms(),
                got: g.len(),
            });
        }
        let mut pairs = Vec::new();
        for x in 0..dist.n_atoms() {
            let x_cf = g.apply(x)?;
            if x_cf >= dist.n_atoms() {
                return Err(Error::UnknownAtom(x_cf));
            }
            for a in [MAJORITY, MINORITY] {
                let mass = dist.atom_group_mass(x, a);
                if mass > 0.0 {
                    pairs.push(CoupledAtom { x, a, x_cf, mass });
                }
            }
        }
        Ok(Self { pairs })
    }

    pub fn total_mass(&self) -> f64 {
        self.pairs.iter().map(|p| p.mass).sum()
    }

    pub fn group_mass(&self, a: u8) -> f64 {
        self.pairs.iter().filter(|p| p.a == a).map(|p| p.mass).sum()
    }
}
