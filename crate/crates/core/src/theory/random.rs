use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::data::{AtomMap, CausalModelSpec};
use crate::rng::rng_from_seed;

/// Random finite causal model over `n_atoms` feature atoms and `n_latent`
/// latent values. `beta` is uniform on `[0.05, 0.6]`.
pub fn random_causal_spec(n_atoms: usize, n_latent: usize, seed: u64) -> CausalModelSpec {
    assert!(n_atoms >= 1 && n_latent >= 1);
    let mut rng = rng_from_seed(seed);
    let beta = rng.random_range(0.05..0.6);
    let raw: Vec<f64> = (0..n_latent).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut u_probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = u_probs[..n_latent - 1].iter().sum();
    u_probs[n_latent - 1] = 1.0 - head;
    let feature_map = (0..n_latent)
        .map(|_| [rng.random_range(0..n_atoms), rng.random_range(0..n_atoms)])
        .collect();
    let label_probs = (0..n_atoms).map(|_| rng.random::<f64>()).collect();
    CausalModelSpec {
        beta,
        u_probs,
        feature_map,
        label_probs,
    }
}

/// Random map with `g(g(x)) = g(x)`: a random non-empty set of fixed atoms,
/// every other atom sent to one of them.
pub fn random_idempotent_map(n_atoms: usize, seed: u64) -> AtomMap {
    assert!(n_atoms >= 1);
    let mut rng = rng_from_seed(seed);
    let mut atoms: Vec<usize> = (0..n_atoms).collect();
    atoms.shuffle(&mut rng);
    let n_fixed = rng.random_range(1..=n_atoms);
    let fixed = &atoms[..n_fixed];
    let mut map: Vec<usize> = (0..n_atoms).collect();
    for &x in &atoms[n_fixed..] {
        map[x] = fixed[rng.random_range(0..n_fixed)];
    }
    AtomMap(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_specs_are_valid() {
        for seed in 0..50 {
            random_causal_spec(6, 5, seed).validate().unwrap();
        }
    }

    #[test]
    fn generated_maps_are_idempotent() {
        for seed in 0..50 {
            assert!(random_idempotent_map(6, seed).is_idempotent());
        }
    }
}
