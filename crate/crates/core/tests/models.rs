use acfair::data::{pca_fit, sample_gmm4, Gmm4Params, TabularDataset};
use acfair::models::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> TabularDataset {
    let w: Vec<f64> = (0..d).map(|_| gauss(rng)).collect();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let x: Vec<f64> = (0..d).map(|_| gauss(rng)).collect();
        let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.5 * gauss(rng);
        features.extend(x);
        // First two rows pin both classes.
        labels.push(match i {
            0 => 0,
            1 => 1,
            _ => u8::from(z > 0.0),
        });
    }
    let attribute = (0..n).map(|i| (i % 4 == 0) as u8).collect();
    TabularDataset::from_flat(features, d, labels, attribute).unwrap()
}

/// Relative error of two vectors in the Euclidean norm.
fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 { diff } else { diff / scale }
}

fn finite_difference(model: &LinearModel, data: &TabularDataset, l2: f64) -> Vec<f64> {
    let h = 1e-5;
    let mut out = Vec::with_capacity(model.w.len() + 1);
    for k in 0..=model.w.len() {
        let shifted = |delta: f64| {
            let mut m = model.clone();
            if k < m.w.len() {
                m.w[k] += delta;
            } else {
                m.b += delta;
            }
            logistic_loss(&m, data, l2)
        };
        out.push((shifted(h) - shifted(-h)) / (2.0 * h));
    }
    out
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = rng.random_range(5..80);
        let d = rng.random_range(1..8);
        let data = random_dataset(&mut rng, n, d);
        let model = LinearModel::new(
            (0..d).map(|_| gauss(&mut rng)).collect(),
            gauss(&mut rng),
        )
        .unwrap();
        let l2 = rng.random_range(0.0..0.1);
        let (gw, gb) = logistic_gradient(&model, &data, l2);
        let mut analytic = gw;
        analytic.push(gb);
        let err = relative_error(&analytic, &finite_difference(&model, &data, l2));
        assert!(err < 1e-5, "relative error {err}");
    }
}

#[test]
fn logreg_reaches_stationary_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = random_dataset(&mut rng, 200, 5);
    let params = LogregParams { l2: 1e-2, ..Default::default() };
    let (model, losses) = train_logreg_traced(&data, &params, 9).unwrap();
    let (gw, gb) = logistic_gradient(&model, &data, params.l2);
    let norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
    assert!(norm < 1e-4, "gradient norm {norm}");
    for pair in losses.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12);
    }
}

#[test]
fn logreg_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = random_dataset(&mut rng, 50, 3);
    let p = LogregParams::default();
    assert_eq!(train_logreg(&data, &p, 1).unwrap(), train_logreg(&data, &p, 1).unwrap());
}

#[test]
fn single_class_is_rejected() {
    let data = TabularDataset::from_flat(vec![0.0, 1.0, 2.0], 1, vec![1, 1, 1], vec![0, 1, 0]).unwrap();
    assert!(train_logreg(&data, &LogregParams::default(), 0).is_err());
    assert!(train_gbt(&data, &GbtParams::default(), 0).is_err());
    assert!(train_linear_svm(&data, &SvmParams::default()).is_err());
}

#[test]
fn gbt_loss_non_increasing_and_fits_xor() {
    let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..5 {
        for r in &rows {
            x.push(r.clone());
            y.push(u8::from((r[0] > 0.5) != (r[1] > 0.5)));
        }
    }
    let n = y.len();
    let data = TabularDataset::from_rows(&x, y.clone(), vec![0; n]).unwrap();
    let (model, losses) = train_gbt_traced(&data, &GbtParams::default(), 0).unwrap();
    assert_eq!(losses.len(), GbtParams::default().rounds + 1);
    for pair in losses.windows(2) {
        assert!(pair[1] <= pair[0] + 1e-12);
    }
    assert_eq!(model.predict(&data).unwrap(), y);
}

#[test]
fn gbt_trees_respect_depth() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = random_dataset(&mut rng, 150, 4);
    for depth in 1..4 {
        let params = GbtParams { max_depth: depth, rounds: 10, ..Default::default() };
        let m = train_gbt(&data, &params, 0).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= depth));
    }
}

#[test]
fn model_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let data = random_dataset(&mut rng, 60, 3);
    let gbt = train_gbt(&data, &GbtParams { rounds: 5, ..Default::default() }, 0).unwrap();
    let file = ModelFile::new(FirmModel::Gbt(gbt));
    let back = ModelFile::from_json(&file.to_json().unwrap()).unwrap();
    assert_eq!(back, file);
    assert_eq!(back.model.predict(&data).unwrap(), file.model.predict(&data).unwrap());
    let wrong = file.to_json().unwrap().replacen("\"format_version\": 1", "\"format_version\": 9", 1);
    assert!(ModelFile::from_json(&wrong).is_err());
}

/// Brute-force scan with the same tie rules: smallest distance, then lowest
/// index; vote ties go to 1.
fn scan(points: &[Vec<f64>], labels: &[u8], k: usize, q: &[f64]) -> (Vec<usize>, u8) {
    let mut order: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum(), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nn: Vec<usize> = order[..k].iter().map(|&(_, i)| i).collect();
    let ones = nn.iter().filter(|&&i| labels[i] == 1).count();
    (nn, u8::from(2 * ones >= k))
}

#[test]
fn knn_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..30 {
        let n = rng.random_range(1..60);
        let d = rng.random_range(1..4);
        // Integer grid coordinates force many exact distance ties.
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-3..4) as f64).collect())
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let k = rng.random_range(1..=n);
        let index = KnnIndex::new(points.concat(), d, labels.clone(), k).unwrap();
        for _ in 0..10 {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-3..4) as f64).collect();
            let (nn, label) = scan(&points, &labels, k, &q);
            assert_eq!(index.neighbors(&q).unwrap(), nn);
            assert_eq!(index.label(&q).unwrap().0, label);
        }
    }
}

#[test]
fn knn_rejects_large_k() {
    assert!(KnnIndex::new(vec![0.0, 1.0], 1, vec![0, 1], 3).is_err());
}

/// Objective of the primal problem the SVM solves.
fn primal(model: &LinearModel, data: &TabularDataset, lambda: f64) -> f64 {
    let hinge: f64 = data
        .rows()
        .zip(data.labels())
        .map(|(x, &y)| {
            let s = if y == 1 { 1.0 } else { -1.0 };
            (1.0 - s * model.score(x)).max(0.0)
        })
        .sum::<f64>()
        / data.len() as f64;
    0.5 * lambda * model.norm().powi(2) + hinge
}

#[test]
fn svm_beats_perturbations_of_its_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let data = random_dataset(&mut rng, 120, 3);
    let params = SvmParams { lambda: 1e-2, ..Default::default() };
    let model = train_linear_svm(&data, &params).unwrap();
    let best = primal(&model, &data, params.lambda);
    for _ in 0..200 {
        let mut m = model.clone();
        for w in m.w.iter_mut() {
            *w += 1e-2 * gauss(&mut rng);
        }
        m.b += 1e-2 * gauss(&mut rng);
        assert!(primal(&m, &data, params.lambda) >= best - 1e-9);
    }
}

#[test]
fn svm_separable_gmm4_classifies_training_set() {
    let p = Gmm4Params::planar(1.0, 1.0, 300, 0, 0.1);
    let data = sample_gmm4(&p, 5).unwrap();
    let model = train_linear_svm(&data, &SvmParams::default()).unwrap();
    assert_eq!(model.predict(&data).unwrap(), data.labels());
}

#[test]
fn svm_direction_invariant_to_scaling() {
    // Scaling x by 10 with λ scaled by 100 leaves the problem equivalent:
    // w' = w / 10 and the same intercept.
    let p = Gmm4Params::planar(1.0, 1.0, 200, 20, 0.4);
    let data = sample_gmm4(&p, 2).unwrap();
    let scaled = data.map_features(2, |r| r.iter().map(|v| 10.0 * v).collect()).unwrap();
    let base = SvmParams { lambda: 1e-3, ..Default::default() };
    let a = train_linear_svm(&data, &base).unwrap();
    let b = train_linear_svm(&scaled, &SvmParams { lambda: 1e-1, ..base }).unwrap();
    for k in 0..2 {
        assert!((a.w[k] - 10.0 * b.w[k]).abs() < 1e-3 * a.norm(), "{:?} {:?}", a.w, b.w);
    }
    let angle = acfair::theory::angle_between_deg(&a.w, &b.w);
    assert!(angle < 0.1, "{angle}");
}

/// Leading eigenvectors by power iteration with deflation.
fn power_pca(cov: &[Vec<f64>], k: usize) -> Vec<(f64, Vec<f64>)> {
    let d = cov.len();
    let mut m: Vec<Vec<f64>> = cov.to_vec();
    let mut out = Vec::new();
    for c in 0..k {
        let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * ((i * 7 + c) % 5) as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let mut next = vec![0.0; d];
            for i in 0..d {
                for j in 0..d {
                    next[i] += m[i][j] * v[j];
                }
            }
            let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            lambda = norm;
            v = next.into_iter().map(|x| x / norm).collect();
        }
        for i in 0..d {
            for j in 0..d {
                m[i][j] -= lambda * v[i] * v[j];
            }
        }
        out.push((lambda, v));
    }
    out
}

#[test]
fn pca_matches_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    // Well separated spectrum so power iteration converges.
    let scales = [3.0, 2.0, 1.0, 0.5];
    let rows: Vec<Vec<f64>> = (0..400)
        .map(|_| {
            let z: Vec<f64> = scales.iter().map(|s| s * gauss(&mut rng)).collect();
            // Fixed rotation mixing the coordinates.
            vec![
                (z[0] + z[1]) / 2f64.sqrt(),
                (z[0] - z[1]) / 2f64.sqrt(),
                (z[2] + z[3]) / 2f64.sqrt(),
                (z[2] - z[3]) / 2f64.sqrt(),
            ]
        })
        .collect();
    let n = rows.len();
    let data = TabularDataset::from_rows(&rows, vec![0; n], vec![0; n]).unwrap();
    let t = pca_fit(&data, 3).unwrap();
    let mean: Vec<f64> = (0..4).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect();
    let cov: Vec<Vec<f64>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect();
    for (c, (lambda, v)) in power_pca(&cov, 3).into_iter().enumerate() {
        assert!((t.eigenvalues[c] - lambda).abs() < 1e-8 * lambda.max(1.0), "{c}");
        let dot: f64 = t.components[c].iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-8, "component {c}: |dot| = {}", dot.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pca_components_orthonormal(seed in any::<u64>(), d in 1usize..6, n in 3usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| gauss(&mut rng)).collect())
            .collect();
        let data = TabularDataset::from_rows(&rows, vec![0; n], vec![0; n]).unwrap();
        let t = pca_fit(&data, d).unwrap();
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = t.components[i].iter().zip(&t.components[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-9);
            }
        }
        for pair in t.eigenvalues.windows(2) {
            prop_assert!(pair[0] >= pair[1]);
        }
        let total: f64 = t.explained_variance_ratio.iter().sum();
        prop_assert!(total <= 1.0 + 1e-9);
    }

    #[test]
    fn linear_proba_agrees_with_sign(w in prop::collection::vec(-5.0f64..5.0, 1..4), b in -5.0f64..5.0, seed in any::<u64>()) {
        let m = LinearModel::new(w.clone(), b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let x: Vec<f64> = (0..w.len()).map(|_| rng.random_range(-1e3..1e3)).collect();
            prop_assert_eq!(m.predict_row(&x), u8::from(m.proba_row(&x) >= 0.5));
        }
    }
}

#[test]
fn model_file_accepts_documented_layouts() {
    let linear = r#"{"format_version": 1, "model": {"kind": "linear", "w": [1.5, -2.0], "b": 0.25}}"#;
    let file = ModelFile::from_json(linear).unwrap();
    assert_eq!(file.model.predict_row(&[1.0, 0.0]), 1);
    let gbt = r#"{
      "format_version": 1,
      "model": {
        "kind": "gbt", "n_features": 2, "base_score": 0.0, "learning_rate": 0.1, "max_depth": 3,
        "trees": [{"nodes": [
          {"node": "split", "feature": 0, "threshold": 0.5, "left": 1, "right": 2},
          {"node": "leaf", "value": -0.1},
          {"node": "leaf", "value": 0.1}
        ]}]
      }
    }"#;
    let file = ModelFile::from_json(gbt).unwrap();
    assert_eq!(file.model.predict_row(&[0.0, 0.0]), 0);
    assert_eq!(file.model.predict_row(&[1.0, 0.0]), 1);
}
