//! Sweeps: every sweep value × repetition, plus one no-action baseline per
//! repetition, executed on a bounded worker pool.
//!
//! Rows are streamed to `results.partial.csv` as cells finish. At the end
//! the table is sorted canonically, aggregate rows are appended, and the
//! result is written to `results.csv` with a `run.json` sidecar.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::Serialize;

use crate::config::{ExperimentConfig, SweepPoint};
use crate::error::{HarnessError, Result};
use crate::pipeline::{prepare, repetition_seed, run_prepared, ExperimentResult, LoadedSource};

pub const CSV_COLUMNS: [&str; 17] = [
    "config_hash",
    "sweep_axis",
    "sweep_value",
    "seed",
    "error",
    "sp",
    "eqod",
    "success",
    "budget_used",
    "wall_ms",
    "row_kind",
    "n",
    "error_std",
    "sp_std",
    "eqod_std",
    "success_std",
    "message",
];

pub const RESULTS_FILE: &str = "results.csv";
pub const PARTIAL_FILE: &str = "results.partial.csv";
pub const SIDECAR_FILE: &str = "run.json";
pub const BASELINE: &str = "baseline";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Cell,
    Baseline,
    Failed,
    Aggregate,
}

impl RowKind {
    pub fn name(self) -> &'static str {
        match self {
            RowKind::Cell => "cell",
            RowKind::Baseline => "baseline",
            RowKind::Failed => "failed",
            RowKind::Aggregate => "aggregate",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cell" => RowKind::Cell,
            "baseline" => RowKind::Baseline,
            "failed" => RowKind::Failed,
            "aggregate" => RowKind::Aggregate,
            _ => return None,
        })
    }
}

/// One line of the result CSV. Aggregate rows carry means in the metric
/// columns, sample standard deviations in the `*_std` columns and no seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub kind: RowKind,
    pub config_hash: String,
    pub sweep_axis: String,
    pub sweep_value: String,
    pub seed: Option<u64>,
    pub error: Option<f64>,
    pub sp: Option<f64>,
    pub eqod: Option<f64>,
    pub success: Option<f64>,
    pub budget_used: Option<f64>,
    pub wall_ms: Option<f64>,
    pub n: Option<usize>,
    pub error_std: Option<f64>,
    pub sp_std: Option<f64>,
    pub eqod_std: Option<f64>,
    pub success_std: Option<f64>,
    pub message: String,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt<T: std::str::FromStr>(s: &str, column: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| HarnessError::Config(format!("result CSV: bad {column} value {s:?}")))
}

impl ResultRow {
    pub fn from_result(r: &ExperimentResult, kind: RowKind, record_wall_ms: bool) -> Self {
        Self {
            kind,
            config_hash: r.config_hash.clone(),
            sweep_axis: r.sweep_axis.clone(),
            sweep_value: r.sweep_value.clone(),
            seed: Some(r.seed),
            error: Some(r.error),
            sp: Some(r.sp),
            eqod: Some(r.eqod),
            success: r.success,
            budget_used: Some(r.budget_used as f64),
            wall_ms: record_wall_ms.then_some(r.wall_ms),
            n: None,
            error_std: None,
            sp_std: None,
            eqod_std: None,
            success_std: None,
            message: String::new(),
        }
    }

    fn failed(cfg_hash: &str, axis: &str, value: &str, seed: u64, message: String) -> Self {
        Self {
            kind: RowKind::Failed,
            config_hash: cfg_hash.to_string(),
            sweep_axis: axis.to_string(),
            sweep_value: value.to_string(),
            seed: Some(seed),
            error: None,
            sp: None,
            eqod: None,
            success: None,
            budget_used: None,
            wall_ms: None,
            n: None,
            error_std: None,
            sp_std: None,
            eqod_std: None,
            success_std: None,
            message,
        }
    }

    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.config_hash.clone(),
            self.sweep_axis.clone(),
            self.sweep_value.clone(),
            opt(self.seed),
            opt(self.error),
            opt(self.sp),
            opt(self.eqod),
            opt(self.success),
            opt(self.budget_used),
            opt(self.wall_ms),
            self.kind.name().to_string(),
            opt(self.n),
            opt(self.error_std),
            opt(self.sp_std),
            opt(self.eqod_std),
            opt(self.success_std),
            self.message.clone(),
        ]
    }

    pub fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != CSV_COLUMNS.len() {
            return Err(HarnessError::Config(format!(
                "result CSV row has {} fields, expected {}",
                rec.len(),
                CSV_COLUMNS.len()
            )));
        }
        let f = |i: usize| parse_opt::<f64>(&rec[i], CSV_COLUMNS[i]);
        Ok(Self {
            kind: RowKind::parse(&rec[10])
                .ok_or_else(|| HarnessError::Config(format!("result CSV: bad row_kind {:?}", &rec[10])))?,
            config_hash: rec[0].to_string(),
            sweep_axis: rec[1].to_string(),
            sweep_value: rec[2].to_string(),
            seed: parse_opt(&rec[3], "seed")?,
            error: f(4)?,
            sp: f(5)?,
            eqod: f(6)?,
            success: f(7)?,
            budget_used: f(8)?,
            wall_ms: f(9)?,
            n: parse_opt(&rec[11], "n")?,
            error_std: f(12)?,
            sp_std: f(13)?,
            eqod_std: f(14)?,
            success_std: f(15)?,
            message: rec[16].to_string(),
        })
    }

    fn is_success(&self) -> bool {
        matches!(self.kind, RowKind::Cell | RowKind::Baseline)
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregate row over the successful member rows of one sweep value.
pub fn aggregate(members: &[&ResultRow]) -> Option<ResultRow> {
    let ok: Vec<&&ResultRow> = members.iter().filter(|r| r.is_success()).collect();
    let first = ok.first()?;
    let column = |get: fn(&ResultRow) -> Option<f64>| -> Option<(f64, f64)> {
        let vals: Option<Vec<f64>> = ok.iter().map(|r| get(r)).collect();
        vals.map(|v| mean_std(&v))
    };
    let error = column(|r| r.error);
    let sp = column(|r| r.sp);
    let eqod = column(|r| r.eqod);
    let success = column(|r| r.success);
    let budget = column(|r| r.budget_used);
    Some(ResultRow {
        kind: RowKind::Aggregate,
        config_hash: first.config_hash.clone(),
        sweep_axis: first.sweep_axis.clone(),
        sweep_value: first.sweep_value.clone(),
        seed: None,
        error: error.map(|x| x.0),
        sp: sp.map(|x| x.0),
        eqod: eqod.map(|x| x.0),
        success: success.map(|x| x.0),
        budget_used: budget.map(|x| x.0),
        wall_ms: None,
        n: Some(ok.len()),
        error_std: error.map(|x| x.1),
        sp_std: sp.map(|x| x.1),
        eqod_std: eqod.map(|x| x.1),
        success_std: success.map(|x| x.1),
        message: String::new(),
    })
}

/// Final, canonically ordered result table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<ResultRow>,
}

impl SweepTable {
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            w.write_record(r.to_record())?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.iter().ne(CSV_COLUMNS) {
            return Err(HarnessError::Config("result CSV header does not match".into()));
        }
        let rows = r
            .records()
            .map(|rec| ResultRow::from_record(&rec?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn rows_of(&self, kind: RowKind) -> impl Iterator<Item = &ResultRow> + '_ {
        self.rows.iter().filter(move |r| r.kind == kind)
    }

    pub fn aggregate_for(&self, sweep_value: &str) -> Option<&ResultRow> {
        self.rows_of(RowKind::Aggregate).find(|r| r.sweep_value == sweep_value)
    }

    pub fn failures(&self) -> usize {
        self.rows_of(RowKind::Failed).count()
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub workers: usize,
    /// Where to write the CSV files; nothing is written when `None`.
    pub out_dir: Option<PathBuf>,
    /// Reuse successful rows of an earlier run with the same config hash
    /// and master seed.
    pub resume: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            out_dir: None,
            resume: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct Timing {
    sweep_value: String,
    seed: u64,
    wall_ms: f64,
    test_sha256: String,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config_hash: String,
    master_seed: u64,
    config: &'a ExperimentConfig,
    cells: usize,
    failures: usize,
    reused: usize,
    timings: Vec<Timing>,
}

/// Cells of one repetition that still need to run.
struct RepTask {
    rep_seed: u64,
    baseline: bool,
    points: Vec<SweepPoint>,
}

type Message = (ResultRow, Option<Timing>);

fn earlier_rows(dir: &Path, hash: &str) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for name in [RESULTS_FILE, PARTIAL_FILE] {
        let path = dir.join(name);
        if path.exists() {
            let table = SweepTable::read_csv(&path)?;
            rows.extend(table.rows.into_iter().filter(|r| r.is_success() && r.config_hash == hash));
        }
    }
    Ok(rows)
}

/// Sort key: baseline first, then sweep value order, members before their
/// aggregate, then seed.
fn canonical_sort(rows: &mut [ResultRow], order: &HashMap<String, f64>) {
    let key = |r: &ResultRow| {
        let value = if r.sweep_value == BASELINE {
            f64::NEG_INFINITY
        } else {
            order.get(&r.sweep_value).copied().unwrap_or(f64::INFINITY)
        };
        (value, r.kind == RowKind::Aggregate, r.seed.unwrap_or(u64::MAX))
    };
    rows.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.cmp(&kb.1))
            .then(ka.2.cmp(&kb.2))
            .then(a.sweep_value.cmp(&b.sweep_value))
    });
}

pub fn sweep(cfg: &ExperimentConfig, opts: &SweepOptions) -> Result<SweepTable> {
    cfg.validate()?;
    let hash = cfg.hash();
    let axis = cfg.sweep.name();
    let points = cfg.sweep.points(&cfg.strategy);
    let source = LoadedSource::load(&cfg.data)?;

    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let rep_seeds: Vec<u64> = (0..cfg.repetitions).map(|r| repetition_seed(cfg.seed, r)).collect();

    // Rows of an earlier run that can be kept.
    let mut done: BTreeMap<(String, u64), ResultRow> = BTreeMap::new();
    if opts.resume {
        if let Some(dir) = &opts.out_dir {
            for r in earlier_rows(dir, &hash)? {
                if let Some(seed) = r.seed.filter(|s| rep_seeds.contains(s)) {
                    done.insert((r.sweep_value.clone(), seed), r);
                }
            }
        }
    }
    let reused = done.len();

    let tasks: Vec<RepTask> = rep_seeds
        .iter()
        .map(|&rep_seed| RepTask {
            rep_seed,
            baseline: !done.contains_key(&(BASELINE.to_string(), rep_seed)),
            points: points
                .iter()
                .filter(|p| !done.contains_key(&(p.label.clone(), rep_seed)))
                .cloned()
                .collect(),
        })
        .filter(|t| t.baseline || !t.points.is_empty())
        .collect();

    let mut partial = match &opts.out_dir {
        Some(dir) => {
            let path = dir.join(PARTIAL_FILE);
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(CSV_COLUMNS)?;
            for r in done.values() {
                w.write_record(r.to_record())?;
            }
            w.flush().map_err(|e| HarnessError::io(&path, e))?;
            Some((w, path))
        }
        None => None,
    };

    let record_wall = cfg.output.record_wall_ms;
    let next = AtomicUsize::new(0);
    let workers = opts.workers.max(1).min(tasks.len().max(1));
    let (tx, rx) = mpsc::channel::<Message>();
    let mut rows: Vec<ResultRow> = done.into_values().collect();
    let mut timings = Vec::new();
    let mut stream_error: Option<HarnessError> = None;

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (tasks, next, source, hash) = (&tasks, &next, &source, &hash);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let prepared = prepare(source, task.rep_seed, cfg.test_fraction);
                let mut actions: Vec<Option<&SweepPoint>> = Vec::new();
                if task.baseline {
                    actions.push(None);
                }
                actions.extend(task.points.iter().map(Some));
                for action in actions {
                    let label = action.map_or(BASELINE, |p| p.label.as_str());
                    let outcome = match &prepared {
                        Ok(p) => run_prepared(cfg, p, action, task.rep_seed),
                        Err(e) => Err(HarnessError::Config(format!("preparing seed {}: {e}", task.rep_seed))),
                    };
                    let msg = match outcome {
                        Ok(res) => {
                            let kind = if action.is_some() { RowKind::Cell } else { RowKind::Baseline };
                            let timing = Timing {
                                sweep_value: res.sweep_value.clone(),
                                seed: res.seed,
                                wall_ms: res.wall_ms,
                                test_sha256: res.test_sha256.clone(),
                            };
                            (ResultRow::from_result(&res, kind, record_wall), Some(timing))
                        }
                        Err(e) => (ResultRow::failed(hash, axis, label, task.rep_seed, e.to_string()), None),
                    };
                    if tx.send(msg).is_err() {
                        return;
                    }
                }
            });
        }
        drop(tx);
        // Single serialized writer.
        for (row, timing) in rx {
            if let Some((w, path)) = partial.as_mut() {
                let res = w
                    .write_record(row.to_record())
                    .map_err(HarnessError::from)
                    .and_then(|_| w.flush().map_err(|e| HarnessError::io(path.as_path(), e)));
                if let Err(e) = res {
                    stream_error.get_or_insert(e);
                }
            }
            timings.extend(timing);
            rows.push(row);
        }
    });
    if let Some(e) = stream_error {
        return Err(e);
    }

    let mut order: HashMap<String, f64> = points.iter().map(|p| (p.label.clone(), p.order_key)).collect();
    order.insert(BASELINE.to_string(), f64::NEG_INFINITY);
    canonical_sort(&mut rows, &order);

    // Aggregates per sweep value, baseline included.
    let mut labels: Vec<String> = vec![BASELINE.to_string()];
    labels.extend(points.iter().map(|p| p.label.clone()));
    for label in &labels {
        let members: Vec<&ResultRow> = rows.iter().filter(|r| &r.sweep_value == label).collect();
        if let Some(agg) = aggregate(&members) {
            rows.push(agg);
        }
    }
    canonical_sort(&mut rows, &order);
    let table = SweepTable { rows };

    if let Some(dir) = &opts.out_dir {
        let path = dir.join(RESULTS_FILE);
        let text = table.to_csv_string()?;
        std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        let partial_path = dir.join(PARTIAL_FILE);
        std::fs::remove_file(&partial_path).map_err(|e| HarnessError::io(&partial_path, e))?;
        timings.sort_by(|a: &Timing, b: &Timing| {
            let ka = order.get(&a.sweep_value).copied().unwrap_or(f64::INFINITY);
            let kb = order.get(&b.sweep_value).copied().unwrap_or(f64::INFINITY);
            ka.total_cmp(&kb).then(a.seed.cmp(&b.seed))
        });
        let sidecar = Sidecar {
            config_hash: hash.clone(),
            master_seed: cfg.seed,
            config: cfg,
            cells: table.rows.iter().filter(|r| r.kind != RowKind::Aggregate).count(),
            failures: table.failures(),
            reused,
            timings,
        };
        let path = dir.join(SIDECAR_FILE);
        let mut f = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        serde_json::to_writer_pretty(&mut f, &sidecar)?;
        f.write_all(b"\n").map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(table)
}
