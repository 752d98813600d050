use acfair::data::{AtomMap, CausalModelSpec, CoupledAtom, Coupling, DiscreteDistribution};
use acfair::metrics::*;
use acfair::models::LinearModel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counting oracle: every rate is a ratio of integer counts.
struct Counts {
    n: [[usize; 2]; 2],
    pos: [[usize; 2]; 2],
}

fn count(pred: &[u8], labels: &[u8], attr: &[u8]) -> Counts {
    let mut c = Counts {
        n: [[0; 2]; 2],
        pos: [[0; 2]; 2],
    };
    for i in 0..pred.len() {
        let (a, y) = (attr[i] as usize, labels[i] as usize);
        c.n[a][y] += 1;
        if pred[i] == 1 {
            c.pos[a][y] += 1;
        }
    }
    c
}

fn oracle_sp(c: &Counts) -> f64 {
    let rate = |a: usize| {
        (c.pos[a][0] + c.pos[a][1]) as f64 / (c.n[a][0] + c.n[a][1]) as f64
    };
    (rate(1) - rate(0)).abs()
}

fn oracle_eqod(c: &Counts) -> f64 {
    let r = |a: usize, y: usize| c.pos[a][y] as f64 / c.n[a][y] as f64;
    0.5 * ((r(1, 1) - r(0, 1)).abs() + (r(1, 0) - r(0, 0)).abs())
}

/// Random triple with every (a, y) cell populated.
fn random_triple(rng: &mut ChaCha8Rng) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    loop {
        let n = rng.random_range(4..300);
        let pred: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let attr: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
        let c = count(&pred, &labels, &attr);
        if c.n.iter().flatten().all(|&k| k > 0) {
            return (pred, labels, attr);
        }
    }
}

#[test]
fn sp_and_eqod_match_counting_on_100_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let (pred, labels, attr) = random_triple(&mut rng);
        let c = count(&pred, &labels, &attr);
        assert_eq!(statistical_parity(&pred, &attr).unwrap(), oracle_sp(&c));
        assert_eq!(equalized_odds(&pred, &labels, &attr).unwrap(), oracle_eqod(&c));
        let errors = pred.iter().zip(&labels).filter(|(p, y)| p != y).count();
        assert_eq!(error_rate(&pred, &labels).unwrap(), errors as f64 / pred.len() as f64);
    }
}

#[test]
fn success_matches_counting_on_100_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let n = rng.random_range(1..500);
        let a: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let b: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let mut same = 0usize;
        for i in 0..n {
            if a[i] == b[i] {
                same += 1;
            }
        }
        assert_eq!(success_from_predictions(&a, &b).unwrap(), same as f64 / n as f64);
    }
}

#[test]
fn success_through_a_classifier() {
    // Sign of the first coordinate; the map negates it for two of four rows.
    let h = LinearModel::new(vec![1.0, 0.0], 0.0).unwrap();
    let x = [1.0, 5.0, -2.0, 1.0, 3.0, 0.0, -1.0, -1.0];
    let gx = [-1.0, 5.0, -2.0, 1.0, -3.0, 0.0, -1.0, -1.0];
    assert_eq!(success(&h, &x, &gx).unwrap(), 0.5);
    assert_eq!(success(&h, &x, &x).unwrap(), 1.0);
}

#[test]
fn empty_cells_are_named() {
    let err = equalized_odds(&[1, 0, 1], &[1, 0, 1], &[0, 0, 1]).unwrap_err();
    assert!(err.to_string().contains("a=1, y=0"), "{err}");
    assert!(statistical_parity(&[1, 0], &[0, 0]).is_err());
}

#[test]
fn report_row_matches_header() {
    let r = FairnessReport::compute(&[1, 0, 1, 0], &[1, 0, 0, 1], &[0, 0, 1, 1]).unwrap();
    assert_eq!(r.csv_row().len(), FairnessReport::CSV_HEADER.len());
    assert_eq!(r.group_count, [2, 2]);
}

#[test]
fn exact_success_by_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n_atoms = rng.random_range(1..6);
        let pairs: Vec<CoupledAtom> = (0..rng.random_range(1..12))
            .map(|_| CoupledAtom {
                x: rng.random_range(0..n_atoms),
                a: rng.random_range(0..2),
                x_cf: rng.random_range(0..n_atoms),
                mass: rng.random_range(0.01..1.0),
            })
            .collect();
        let labels: Vec<u8> = (0..n_atoms).map(|_| rng.random_range(0..2)).collect();
        let coupling = Coupling { pairs: pairs.clone() };
        let agree: f64 = pairs
            .iter()
            .filter(|p| labels[p.x] == labels[p.x_cf])
            .map(|p| p.mass)
            .sum();
        let total: f64 = pairs.iter().map(|p| p.mass).sum();
        let got = exact_success(&coupling, &labels, None).unwrap();
        assert!((got - agree / total).abs() < 1e-12);
    }
}

#[test]
fn tau_of_identity_is_zero() {
    let dist = DiscreteDistribution::new(vec![
        [[0.1, 0.2], [0.05, 0.05]],
        [[0.3, 0.0], [0.1, 0.2]],
    ])
    .unwrap();
    assert_eq!(estimate_tau(&dist, &AtomMap::identity(2)).unwrap(), 0.0);
    // Swapping atoms: tau = Σ m(x) |p(x) - p(x')|.
    let p0: f64 = 0.25 / 0.4;
    let p1: f64 = 0.2 / 0.6;
    let want = 0.4 * (p0 - p1).abs() + 0.6 * (p1 - p0).abs();
    let got = estimate_tau(&dist, &AtomMap(vec![1, 0])).unwrap();
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn attribute_blind_model_is_cf_fair() {
    let spec = CausalModelSpec {
        beta: 0.4,
        u_probs: vec![0.2, 0.3, 0.5],
        feature_map: vec![[0, 0], [1, 1], [2, 2]],
        label_probs: vec![0.1, 0.6, 0.9],
    };
    let dist = acfair::data::enumerate_causal(&spec).unwrap();
    assert!(check_one_sided_cf_fairness(&dist, &Coupling::erasure(&spec).unwrap()));
}

fn triple_strategy() -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<u8>)> {
    (4usize..120).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0u8..2, n),
        )
    })
}

proptest! {
    #[test]
    fn metrics_invariant_under_row_permutation(
        (pred, labels, attr) in triple_strategy(),
        seed in any::<u64>(),
    ) {
        let c = count(&pred, &labels, &attr);
        prop_assume!(c.n.iter().flatten().all(|&k| k > 0));
        let mut order: Vec<usize> = (0..pred.len()).collect();
        use rand::seq::SliceRandom;
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let p2: Vec<u8> = order.iter().map(|&i| pred[i]).collect();
        let l2: Vec<u8> = order.iter().map(|&i| labels[i]).collect();
        let a2: Vec<u8> = order.iter().map(|&i| attr[i]).collect();
        let sp = statistical_parity(&pred, &attr).unwrap();
        let sp2 = statistical_parity(&p2, &a2).unwrap();
        prop_assert!((sp - sp2).abs() < 1e-12);
        let e = equalized_odds(&pred, &labels, &attr).unwrap();
        let e2 = equalized_odds(&p2, &l2, &a2).unwrap();
        prop_assert!((e - e2).abs() < 1e-12);
    }

    #[test]
    fn metrics_bounded_and_symmetric_in_groups((pred, labels, attr) in triple_strategy()) {
        let c = count(&pred, &labels, &attr);
        prop_assume!(c.n.iter().flatten().all(|&k| k > 0));
        let swapped: Vec<u8> = attr.iter().map(|a| 1 - a).collect();
        let sp = statistical_parity(&pred, &attr).unwrap();
        let e = equalized_odds(&pred, &labels, &attr).unwrap();
        prop_assert!((0.0..=1.0).contains(&sp));
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert_eq!(sp, statistical_parity(&pred, &swapped).unwrap());
        prop_assert_eq!(e, equalized_odds(&pred, &labels, &swapped).unwrap());
    }
}
