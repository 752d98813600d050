use std::path::Path;
use std::process::Command;

use acfair::data::{CausalModelSpec, Gmm4Params};
use acfair::models::{GbtParams, LogregParams};
use acfair::strategies::{StrategyConfig, StrategyKind, SurrogateModel};
use acfair_harness::config::{DataSource, ExperimentConfig, FirmSpec, OutputConfig, SchemaRef, SweepAxis};
use acfair_harness::pipeline::{dataset_sha256, prepare, repetition_seed, run_once, LoadedSource};
use acfair_harness::sweep::{mean_std, sweep, ResultRow, RowKind, SweepOptions, SweepTable, RESULTS_FILE, SIDECAR_FILE};
use acfair_harness::{non_dominated, pareto};

fn gmm_config(budgets: Vec<Option<usize>>, reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        firm: FirmSpec::Logreg(LogregParams::default()),
        strategy: StrategyConfig {
            kind: StrategyKind::ByProbability,
            surrogate: SurrogateModel::Logreg(LogregParams::default()),
            ..Default::default()
        },
        sweep: SweepAxis::Budget(budgets),
        repetitions: reps,
        seed: 11,
        ..ExperimentConfig::new(DataSource::Gmm4 {
            params: Gmm4Params::planar(1.0, 1.0, 400, 100, 0.5),
        })
    }
}

fn metrics(r: &ResultRow) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    (r.error, r.sp, r.eqod, r.success)
}

#[test]
fn budget_zero_reproduces_the_baseline() {
    let table = sweep(&gmm_config(vec![Some(0)], 3), &SweepOptions::default()).unwrap();
    let baselines: Vec<&ResultRow> = table.rows_of(RowKind::Baseline).collect();
    assert_eq!(baselines.len(), 3);
    for b in baselines {
        let cell = table
            .rows_of(RowKind::Cell)
            .find(|c| c.seed == b.seed)
            .unwrap();
        assert_eq!(metrics(cell), metrics(b));
        assert_eq!(cell.budget_used, Some(0.0));
    }
}

#[test]
fn row_counts() {
    let table = sweep(&gmm_config(vec![Some(2), Some(5), Some(9)], 2), &SweepOptions::default()).unwrap();
    assert_eq!(table.rows_of(RowKind::Cell).count(), 6);
    assert_eq!(table.rows_of(RowKind::Baseline).count(), 2);
    let aggregates: Vec<&str> = table.rows_of(RowKind::Aggregate).map(|r| r.sweep_value.as_str()).collect();
    assert_eq!(aggregates, ["baseline", "2", "5", "9"]);
    // One row per (sweep value, seed).
    let mut keys: Vec<(String, u64)> = table
        .rows
        .iter()
        .filter(|r| r.kind != RowKind::Aggregate)
        .map(|r| (r.sweep_value.clone(), r.seed.unwrap()))
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 8);
}

#[test]
fn aggregates_recompute_from_members() {
    let table = sweep(&gmm_config(vec![Some(3), None], 4), &SweepOptions::default()).unwrap();
    for agg in table.rows_of(RowKind::Aggregate) {
        let members: Vec<&ResultRow> = table
            .rows
            .iter()
            .filter(|r| r.sweep_value == agg.sweep_value && r.kind != RowKind::Aggregate)
            .collect();
        assert_eq!(agg.n, Some(members.len()));
        type Get = fn(&ResultRow) -> Option<f64>;
        let columns: [(Get, Get); 3] = [
            (|r| r.error, |r| r.error_std),
            (|r| r.eqod, |r| r.eqod_std),
            (|r| r.sp, |r| r.sp_std),
        ];
        for (get, get_std) in columns {
            let vals: Vec<f64> = members.iter().map(|r| get(r).unwrap()).collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((get(agg).unwrap() - mean).abs() < 1e-12);
            assert!((get_std(agg).unwrap() - std).abs() < 1e-12);
        }
    }
    assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
}

#[test]
fn rows_are_in_canonical_order() {
    let table = sweep(&gmm_config(vec![None, Some(7), Some(1)], 3), &SweepOptions::default()).unwrap();
    let values: Vec<&str> = table.rows.iter().map(|r| r.sweep_value.as_str()).collect();
    let mut order = values.clone();
    order.dedup();
    assert_eq!(order, ["baseline", "1", "7", "unlimited"]);
    for chunk in table.rows.chunk_by(|a, b| a.sweep_value == b.sweep_value) {
        let (agg, members) = chunk.split_last().unwrap();
        assert_eq!(agg.kind, RowKind::Aggregate);
        assert!(members.windows(2).all(|w| w[0].seed < w[1].seed));
    }
}

#[test]
fn deterministic_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = gmm_config(vec![Some(0), Some(4), None], 4);
    let run = |name: &str, workers: usize| {
        let out = dir.path().join(name);
        sweep(&cfg, &SweepOptions { workers, out_dir: Some(out.clone()), resume: false }).unwrap();
        std::fs::read(out.join(RESULTS_FILE)).unwrap()
    };
    let a = run("a", 1);
    let b = run("b", 1);
    let c = run("c", 3);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(dir.path().join("a").join(SIDECAR_FILE).exists());
    assert!(!dir.path().join("a").join("results.partial.csv").exists());
}

#[test]
fn test_split_is_never_touched() {
    let cfg = gmm_config(vec![None], 1);
    let seed = repetition_seed(cfg.seed, 0);
    let source = LoadedSource::load(&cfg.data).unwrap();
    let prepared = prepare(&source, seed, cfg.test_fraction).unwrap();
    let points = cfg.sweep.points(&cfg.strategy);
    let result = run_once(&cfg, Some(&points[0]), seed).unwrap();
    assert!(result.budget_used > 0);
    assert_eq!(result.test_sha256, dataset_sha256(&prepared.test));
    // Independent check: test rows are exactly the rows a plain split gives.
    let (full, _) = source.materialize(seed).unwrap();
    let (_, test) = acfair::split(&full, cfg.test_fraction, acfair::rng::derive_seed(seed, acfair::rng::stream::SPLIT)).unwrap();
    assert_eq!(dataset_sha256(&test), result.test_sha256);
}

#[test]
fn failed_cells_are_recorded_and_the_sweep_continues() {
    // More neighbours than visible majority rows: every planning cell fails,
    // the baselines still run.
    let mut cfg = gmm_config(vec![Some(1), Some(2)], 2);
    cfg.strategy = StrategyConfig {
        kind: StrategyKind::ByDistance,
        knowledge_fraction: 0.01,
        k_neighbors: 50,
        ..Default::default()
    };
    let table = sweep(&cfg, &SweepOptions::default()).unwrap();
    assert_eq!(table.failures(), 4);
    assert_eq!(table.rows_of(RowKind::Baseline).count(), 2);
    for r in table.rows_of(RowKind::Failed) {
        assert!(r.message.contains("sweep value"), "{}", r.message);
        assert!(r.error.is_none());
    }
    assert!(table.aggregate_for("1").is_none());
    assert!(table.aggregate_for("baseline").is_some());
}

#[test]
fn resume_reruns_only_missing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_path_buf();
    let cfg = gmm_config(vec![Some(2), None], 3);
    let opts = SweepOptions { workers: 2, out_dir: Some(out.clone()), resume: true };
    sweep(&cfg, &opts).unwrap();
    let fresh = std::fs::read_to_string(out.join(RESULTS_FILE)).unwrap();

    // Drop two cells and corrupt one into a failure.
    let mut table = SweepTable::read_csv(out.join(RESULTS_FILE)).unwrap();
    let cells: Vec<usize> = (0..table.rows.len()).filter(|&i| table.rows[i].kind == RowKind::Cell).collect();
    table.rows[cells[0]].kind = RowKind::Failed;
    table.rows[cells[0]].error = None;
    let removed = [cells[1], cells[2]];
    let kept: Vec<ResultRow> = table
        .rows
        .iter()
        .enumerate()
        .filter(|(i, r)| !removed.contains(i) && r.kind != RowKind::Aggregate)
        .map(|(_, r)| r.clone())
        .collect();
    std::fs::write(out.join(RESULTS_FILE), SweepTable { rows: kept }.to_csv_string().unwrap()).unwrap();

    sweep(&cfg, &opts).unwrap();
    assert_eq!(std::fs::read_to_string(out.join(RESULTS_FILE)).unwrap(), fresh);
    let sidecar: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join(SIDECAR_FILE)).unwrap()).unwrap();
    // 3 baselines + 6 cells, minus the three that had to be re-run.
    assert_eq!(sidecar["reused"], 6);
    assert_eq!(sidecar["timings"].as_array().unwrap().len(), 3);
}

#[test]
fn wall_time_column_is_opt_in() {
    let mut cfg = gmm_config(vec![Some(1)], 1);
    let table = sweep(&cfg, &SweepOptions::default()).unwrap();
    assert!(table.rows.iter().all(|r| r.wall_ms.is_none()));
    cfg.output = OutputConfig { dir: None, record_wall_ms: true };
    let table = sweep(&cfg, &SweepOptions::default()).unwrap();
    assert!(table.rows_of(RowKind::Cell).all(|r| r.wall_ms.unwrap() >= 0.0));
}

#[test]
fn causal_source_reports_success() {
    let spec = CausalModelSpec {
        beta: 0.3,
        u_probs: vec![0.3, 0.3, 0.4],
        feature_map: vec![[0, 3], [1, 4], [2, 5]],
        label_probs: vec![0.9, 0.2, 0.7, 0.3, 0.8, 0.1],
    };
    let mut cfg = ExperimentConfig::new(DataSource::Causal { spec, n: 3000 });
    cfg.firm = FirmSpec::Gbt(GbtParams { rounds: 20, ..Default::default() });
    cfg.strategy = StrategyConfig { kind: StrategyKind::Random, ..Default::default() };
    cfg.repetitions = 2;
    let table = sweep(&cfg, &SweepOptions::default()).unwrap();
    assert_eq!(table.failures(), 0);
    for r in table.rows_of(RowKind::Cell) {
        let s = r.success.unwrap();
        assert!((0.0..=1.0).contains(&s));
    }
}

/// Adult-style table: categorical columns, a protected `sex` column and a
/// `>50K` income label. The label depends on education and hours, with a
/// lower positive rate in the protected group.
fn write_adult_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let csv_path = dir.join("adult_small.csv");
    let mut text = String::from("age,workclass,education_num,sex,race,hours_per_week,income\n");
    let workclasses = ["Private", "Self-emp", "Gov", "Never-worked"];
    let races = ["White", "Black", "Other"];
    for i in 0..600u64 {
        let h = acfair::rng::splitmix64(i);
        let age = 18 + h % 50;
        let education = 6 + (h >> 8) % 10;
        let hours = 20 + (h >> 16) % 40;
        let female = (h >> 24) % 3 == 0;
        let score = education as f64 * 0.6 + hours as f64 * 0.08 - if female { 1.5 } else { 0.0 };
        let noisy = score + ((h >> 32) % 100) as f64 / 40.0;
        let income = if noisy > 10.0 { ">50K" } else { "<=50K" };
        text.push_str(&format!(
            "{age},{},{education},{},{},{hours},{income}\n",
            workclasses[((h >> 40) % 4) as usize],
            if female { "Female" } else { "Male" },
            races[((h >> 48) % 3) as usize],
        ));
    }
    std::fs::write(&csv_path, text).unwrap();
    let schema_path = dir.join("adult_schema.json");
    std::fs::write(
        &schema_path,
        r#"{"label_column": "income", "positive_label_value": ">50K", "attribute_column": "sex",
            "protected_value": "Female", "categorical_columns": ["workclass", "race"]}"#,
    )
    .unwrap();
    (csv_path, schema_path)
}

#[test]
fn csv_dataset_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let (csv_path, schema_path) = write_adult_fixture(dir.path());
    let config_path = dir.path().join("adult.json");
    std::fs::write(
        &config_path,
        r#"{
            "data": {"source": "csv", "path": "adult_small.csv", "schema": "adult_schema.json"},
            "firm": {"kind": "gbt", "rounds": 30},
            "strategy": {"kind": "by_label", "alpha": 0.5},
            "sweep": {"axis": "budget", "values": [0, 10, null]},
            "repetitions": 3
        }"#,
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&config_path).unwrap();
    assert!(matches!(&cfg.data, DataSource::Csv { path, schema: SchemaRef::Path(s) } if *path == csv_path && *s == schema_path));
    let table = sweep(&cfg, &SweepOptions::default()).unwrap();
    assert_eq!(table.failures(), 0, "{:?}", table.rows_of(RowKind::Failed).next());
    assert!(table.rows.iter().all(|r| r.success.is_none()));
    let unlimited = table.rows_of(RowKind::Cell).filter(|r| r.sweep_value == "unlimited");
    assert!(unlimited.into_iter().all(|r| r.budget_used.unwrap() > 10.0));
}

#[test]
fn pareto_points_and_flags() {
    let mut cfg = gmm_config(vec![Some(5)], 2);
    cfg.firm = FirmSpec::Gbt(GbtParams { rounds: 20, ..Default::default() });
    let table = pareto(&cfg, &SweepOptions::default()).unwrap();
    let labels: Vec<&str> = table.points.iter().map(|p| p.label.as_str()).collect();
    assert_eq!(labels, ["baseline", "5", "postprocess"]);
    let flags = non_dominated(&table.points.iter().map(|p| (p.error, p.eqod)).collect::<Vec<_>>());
    assert_eq!(table.points.iter().map(|p| p.non_dominated).collect::<Vec<_>>(), flags);
    assert!(table.points.iter().any(|p| p.non_dominated));
    let text = table.to_csv_string().unwrap();
    assert!(text.starts_with("config_hash,point,error,eqod,error_std,eqod_std,n,non_dominated\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn pareto_rejects_other_axes() {
    let mut cfg = gmm_config(vec![Some(5)], 1);
    cfg.sweep = SweepAxis::Alpha(vec![0.3]);
    assert!(pareto(&cfg, &SweepOptions::default()).is_err());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_acfair"))
}

#[test]
fn cli_sweep_and_plan() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    let mut cfg = gmm_config(vec![], 2);
    cfg.sweep = SweepAxis::None;
    std::fs::write(&config, cfg.to_json().unwrap()).unwrap();
    let out = dir.path().join("out");
    let status = cli()
        .args(["sweep-flips", "--config"])
        .arg(&config)
        .args(["--seed", "5", "--workers", "2", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let table = SweepTable::read_csv(out.join(RESULTS_FILE)).unwrap();
    assert_eq!(table.rows_of(RowKind::Aggregate).count(), 7);
    assert!(table.rows.iter().all(|r| r.sweep_axis == "budget"));

    let plan = cli().args(["plan", "--format", "json", "--config"]).arg(&config).output().unwrap();
    assert!(plan.status.success());
    let parsed = acfair::strategies::FlipPlan::from_json(&String::from_utf8(plan.stdout).unwrap()).unwrap();
    assert_eq!(parsed.strategy, "by_probability");

    let mismatch = cli().args(["sweep-alpha", "--config"]).arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn cli_theory_check_exit_codes() {
    let ok = cli().args(["theory-check", "--which", "cf-equivalence"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["checks"][0]["details"]["exceptions"], 0);
    let bad = cli().args(["theory-check", "--which", "b9"]).output().unwrap();
    assert!(!bad.status.success());
}
