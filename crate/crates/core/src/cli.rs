//! The `train`, `eval` and `ablate` commands.
//!
//! Each `cmd_*` function returns a process exit code: 0 on success, 2 for
//! configuration errors, 3 for numerical aborts, 4 for I/O and checkpoint
//! errors. The `run_*` functions underneath return typed results.
//!
//! `train` writes into its output directory:
//!
//! | file | content |
//! |---|---|
//! | `metrics.csv` | `epoch,loss_x,loss_u1,loss_u2,loss_s,loss_total,high_count,mid_count,discard_count,mined_ratio,pseudo_precision,val_acc` |
//! | `thresholds.csv` | `epoch,class_0,...,class_{C-1}` (live `T_c` after each epoch) |
//! | `mined_ratio.csv` | `epoch,mid_count,unlabeled_views,mined_ratio` |
//! | `checkpoint.json` | latest [`Checkpoint`] |
//! | `config.toml` | resolved configuration |
//! | `manifest.json`, `summary.json` | run description and final result |

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::{Prepared, RunConfig};
use crate::data::{load_csv, load_idx_images, Dataset};
use crate::error::{Error, Result};
use crate::trainer::{evaluate, train, EpochMetrics, EvalReport, TrainState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const METRICS_HEADER: [&str; 12] = [
    "epoch",
    "loss_x",
    "loss_u1",
    "loss_u2",
    "loss_s",
    "loss_total",
    "high_count",
    "mid_count",
    "discard_count",
    "mined_ratio",
    "pseudo_precision",
    "val_acc",
];

pub const ABLATION_HEADER: [&str; 16] = [
    "variant",
    "adaptive_threshold",
    "similar_loss",
    "tau",
    "sim_threshold",
    "k",
    "temperature",
    "status",
    "seeds",
    "val_acc_per_seed",
    "val_acc_median",
    "mid_count",
    "loss_s",
    "mined_ratio",
    "pseudo_precision",
    "error",
];

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidParameter(_) | Error::Generation(_) | Error::Split(_) => EXIT_CONFIG,
        Error::Numerical(_) => EXIT_NUMERICAL,
        Error::Io(_) | Error::Format { .. } | Error::Dimension { .. } | Error::InvalidDistribution(_) => EXIT_IO,
    }
}

fn report(result: Result<()>) -> i32 {
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format("csv", format!("{other:?}")),
    }
}

fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn metrics_row(m: &EpochMetrics) -> Vec<String> {
    vec![
        m.epoch.to_string(),
        m.loss_x.to_string(),
        m.loss_u1.to_string(),
        m.loss_u2.to_string(),
        m.loss_s.to_string(),
        m.loss_total.to_string(),
        m.high_count.to_string(),
        m.mid_count.to_string(),
        m.discard_count.to_string(),
        m.mined_ratio.to_string(),
        m.pseudo_precision.to_string(),
        opt_cell(m.val_acc),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: String,
    pub seed: u64,
    pub dataset: String,
    pub output_dir: String,
    pub start_unix_ms: u128,
    pub end_unix_ms: u128,
    pub final_val_acc: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub final_metrics: Option<EpochMetrics>,
    pub validation: Option<EvalReport>,
}

struct RunWriters {
    metrics: csv::Writer<File>,
    thresholds: csv::Writer<File>,
    mined: csv::Writer<File>,
}

impl RunWriters {
    fn create(out: &Path, num_classes: usize) -> Result<Self> {
        let open = |name: &str| csv::Writer::from_path(out.join(name)).map_err(csv_err);
        let mut w = RunWriters {
            metrics: open("metrics.csv")?,
            thresholds: open("thresholds.csv")?,
            mined: open("mined_ratio.csv")?,
        };
        w.metrics.write_record(METRICS_HEADER).map_err(csv_err)?;
        let mut th = vec!["epoch".to_string()];
        th.extend((0..num_classes).map(|c| format!("class_{c}")));
        w.thresholds.write_record(&th).map_err(csv_err)?;
        w.mined
            .write_record(["epoch", "mid_count", "unlabeled_views", "mined_ratio"])
            .map_err(csv_err)?;
        Ok(w)
    }

    fn write(&mut self, m: &EpochMetrics) -> Result<()> {
        self.metrics.write_record(metrics_row(m)).map_err(csv_err)?;
        let mut th = vec![m.epoch.to_string()];
        th.extend(m.thresholds.iter().map(|t| t.to_string()));
        self.thresholds.write_record(&th).map_err(csv_err)?;
        let views = m.high_count + m.mid_count + m.discard_count;
        self.mined
            .write_record([
                m.epoch.to_string(),
                m.mid_count.to_string(),
                views.to_string(),
                m.mined_ratio.to_string(),
            ])
            .map_err(csv_err)?;
        for w in [&mut self.metrics, &mut self.thresholds, &mut self.mined] {
            w.flush()?;
        }
        Ok(())
    }
}

/// Trains `cfg` and writes every artifact into `out`.
pub fn run_train(cfg: &RunConfig, out: &Path) -> Result<TrainSummary> {
    let start = unix_millis();
    cfg.validate()?;
    let Prepared { splits, arch, standardizer } = cfg.prepare()?;
    fs::create_dir_all(out)?;
    let text = cfg.to_toml_string();
    fs::write(out.join("config.toml"), &text)?;

    let mut writers = RunWriters::create(out, arch.num_classes)?;
    let ck_path = out.join("checkpoint.json");
    let mut state = TrainState::new(arch, &cfg.train)?;
    let history = train(&mut state, &cfg.train, &splits, |m, s| {
        writers.write(m)?;
        Checkpoint::from_state(s, standardizer.as_ref(), &text).save(&ck_path)
    })?;

    let validation = if splits.validation.is_empty() {
        None
    } else {
        Some(evaluate(state.eval_params(&cfg.train), &splits.validation)?)
    };
    let summary = TrainSummary {
        epochs: history.len(),
        final_metrics: history.last().cloned(),
        validation,
    };
    let manifest = RunManifest {
        config: text,
        seed: cfg.train.seed,
        dataset: cfg.data.describe(),
        output_dir: out.display().to_string(),
        start_unix_ms: start,
        end_unix_ms: unix_millis(),
        final_val_acc: history.last().and_then(|m| m.val_acc),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::format("json", e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn cmd_train(config_path: &Path, out: &Path, seed: Option<u64>) -> i32 {
    report((|| {
        let mut cfg = RunConfig::from_path(config_path)?;
        if let Some(s) = seed {
            cfg = cfg.with_seed(s);
        }
        let summary = run_train(&cfg, out)?;
        if let Some(m) = &summary.final_metrics {
            println!(
                "trained {} epochs; val_acc {}",
                summary.epochs,
                opt_cell(m.val_acc)
            );
        }
        Ok(())
    })())
}

/// What `eval --data` points at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataArg {
    /// Validation split of the configuration stored in the checkpoint.
    Embedded,
    /// Validation split of a configuration file.
    Config(PathBuf),
    /// Every row of a CSV file.
    Csv(PathBuf),
    /// Every image of an IDX image/label pair.
    Idx(PathBuf, PathBuf),
}

impl DataArg {
    /// Parses `embedded`, `csv:PATH`, `idx:IMAGES,LABELS`, `config:PATH`, or a
    /// bare configuration path.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "embedded" {
            return Ok(DataArg::Embedded);
        }
        if let Some(p) = s.strip_prefix("csv:") {
            return Ok(DataArg::Csv(p.into()));
        }
        if let Some(rest) = s.strip_prefix("idx:") {
            let (img, lbl) = rest
                .split_once(',')
                .ok_or_else(|| Error::config("data", "idx data needs `idx:IMAGES,LABELS`"))?;
            return Ok(DataArg::Idx(img.into(), lbl.into()));
        }
        Ok(DataArg::Config(s.strip_prefix("config:").unwrap_or(s).into()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalOutput {
    pub accuracy: f64,
    pub per_class: Vec<f64>,
    pub class_counts: Vec<usize>,
    pub samples: usize,
    pub weights: &'static str,
}

pub fn run_eval(checkpoint_path: &Path, data: &DataArg) -> Result<EvalOutput> {
    let ck = Checkpoint::load(checkpoint_path)?;
    let embedded = RunConfig::from_toml_str(&ck.config)
        .map_err(|e| Error::format("config", format!("checkpoint holds an unusable config: {e}")))?;
    let raw: Dataset = match data {
        DataArg::Embedded => embedded.prepare_raw()?.0.validation,
        DataArg::Config(p) => RunConfig::from_path(p)?.prepare_raw()?.0.validation,
        DataArg::Csv(p) => load_csv(p)?,
        DataArg::Idx(i, l) => load_idx_images(i, l)?,
    };
    let dataset = match &ck.standardizer {
        Some(st) => st.apply_dataset(&raw),
        None => raw,
    };
    if dataset.num_classes() > ck.architecture.num_classes {
        return Err(Error::format(
            "data",
            format!(
                "dataset has {} classes, model has {}",
                dataset.num_classes(),
                ck.architecture.num_classes
            ),
        ));
    }
    let (model, weights) = if embedded.train.eval_with_ema {
        (ck.ema_model()?, "ema")
    } else {
        (ck.live_model()?, "live")
    };
    let r = evaluate(&model, &dataset)?;
    Ok(EvalOutput {
        accuracy: r.accuracy,
        per_class: r.per_class,
        class_counts: r.class_counts,
        samples: dataset.len(),
        weights,
    })
}

pub fn cmd_eval(checkpoint_path: &Path, data: &str) -> i32 {
    report((|| {
        let out = run_eval(checkpoint_path, &DataArg::parse(data)?)?;
        println!("{}", serde_json::to_string(&out).expect("eval output serializes"));
        Ok(())
    })())
}

/// One point of the ablation grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variant {
    pub name: String,
    pub adaptive_threshold: bool,
    pub similar_loss: bool,
    pub tau: f64,
    pub sim_threshold: f64,
    pub k: usize,
    pub temperature: f64,
}

impl Variant {
    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut cfg = base.clone();
        let t = &mut cfg.train;
        t.use_adaptive_threshold = self.adaptive_threshold;
        t.use_similar_loss = self.similar_loss;
        t.tau = self.tau;
        t.sim_threshold = self.sim_threshold;
        t.k_weak = self.k;
        t.temperature = self.temperature;
        cfg
    }
}

fn or_base<T: Clone>(list: &[T], base: T) -> Vec<T> {
    if list.is_empty() {
        vec![base]
    } else {
        list.to_vec()
    }
}

/// Cartesian product of the configured grid, in a fixed order.
pub fn ablation_variants(cfg: &RunConfig) -> Vec<Variant> {
    let t = &cfg.train;
    let a = &cfg.ablate;
    let mut out = Vec::new();
    for &adaptive in &or_base(&a.adaptive_threshold, t.use_adaptive_threshold) {
        for &similar in &or_base(&a.similar_loss, t.use_similar_loss) {
            for &tau in &or_base(&a.tau, t.tau) {
                for &ts in &or_base(&a.sim_threshold, t.sim_threshold) {
                    for &k in &or_base(&a.k, t.k_weak) {
                        for &temp in &or_base(&a.temperature, t.temperature) {
                            let on = |b: bool| if b { "on" } else { "off" };
                            out.push(Variant {
                                name: format!(
                                    "adt={},sim={},tau={tau},ts={ts},k={k},T={temp}",
                                    on(adaptive),
                                    on(similar)
                                ),
                                adaptive_threshold: adaptive,
                                similar_loss: similar,
                                tau,
                                sim_threshold: ts,
                                k,
                                temperature: temp,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Outcome of one `(variant, seed)` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    pub val_acc: f64,
    pub mid_count: usize,
    pub mean_loss_s: f64,
    pub mined_ratio: f64,
    pub pseudo_precision: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub results: Vec<SeedResult>,
    /// First failure among the seeds, if any.
    pub error: Option<String>,
}

impl AblationRow {
    pub fn median_acc(&self) -> Option<f64> {
        median(&self.results.iter().map(|r| r.val_acc).collect::<Vec<_>>())
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Trains one run in memory and summarizes it.
pub fn run_single(cfg: &RunConfig) -> Result<SeedResult> {
    let Prepared { splits, arch, .. } = cfg.prepare()?;
    let mut state = TrainState::new(arch, &cfg.train)?;
    let history = train(&mut state, &cfg.train, &splits, |_, _| Ok(()))?;
    let val_acc = evaluate(state.eval_params(&cfg.train), &splits.validation)?.accuracy;
    let epochs = history.len().max(1) as f64;
    let mid: usize = history.iter().map(|m| m.mid_count).sum();
    let views: usize = history.iter().map(|m| m.high_count + m.mid_count + m.discard_count).sum();
    Ok(SeedResult {
        seed: cfg.train.seed,
        val_acc,
        mid_count: mid,
        mean_loss_s: history.iter().map(|m| m.loss_s).sum::<f64>() / epochs,
        mined_ratio: if views == 0 { 0.0 } else { mid as f64 / views as f64 },
        pseudo_precision: history.iter().map(|m| m.pseudo_precision).sum::<f64>() / epochs,
    })
}

/// Runs every `(variant, seed)` pair, spreading them over `threads` workers.
///
/// Each run is independent and deterministic, so the result does not depend
/// on the thread count.
pub fn run_ablation(cfg: &RunConfig, threads: usize) -> Vec<AblationRow> {
    let variants = ablation_variants(cfg);
    let seeds = or_base(&cfg.ablate.seeds, cfg.train.seed);
    let jobs: Vec<(usize, u64)> = (0..variants.len())
        .flat_map(|v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Mutex<Vec<Option<Result<SeedResult>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = Mutex::new(0usize);
    std::thread::scope(|scope| {
        for _ in 0..threads.max(1).min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("job counter");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(&(v, seed)) = jobs.get(i) else { break };
                let run_cfg = variants[v].apply(cfg).with_seed(seed);
                let r = run_single(&run_cfg);
                results.lock().expect("result slots")[i] = Some(r);
            });
        }
    });

    let mut results = results.into_inner().expect("result slots").into_iter();
    variants
        .into_iter()
        .map(|variant| {
            let mut row = AblationRow { variant, results: Vec::new(), error: None };
            for _ in &seeds {
                match results.next().flatten() {
                    Some(Ok(r)) => row.results.push(r),
                    Some(Err(e)) => {
                        row.error.get_or_insert_with(|| e.to_string());
                    }
                    None => {
                        row.error.get_or_insert_with(|| "run did not complete".into());
                    }
                }
            }
            row
        })
        .collect()
}

pub fn write_ablation_csv(rows: &[AblationRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(ABLATION_HEADER).map_err(csv_err)?;
    for row in rows {
        let v = &row.variant;
        let r = &row.results;
        let join = |f: &dyn Fn(&SeedResult) -> String| r.iter().map(f).collect::<Vec<_>>().join(";");
        let mean = |f: &dyn Fn(&SeedResult) -> f64| {
            if r.is_empty() {
                String::new()
            } else {
                (r.iter().map(f).sum::<f64>() / r.len() as f64).to_string()
            }
        };
        w.write_record([
            v.name.clone(),
            v.adaptive_threshold.to_string(),
            v.similar_loss.to_string(),
            v.tau.to_string(),
            v.sim_threshold.to_string(),
            v.k.to_string(),
            v.temperature.to_string(),
            if row.error.is_none() { "ok".into() } else { "failed".into() },
            join(&|s| s.seed.to_string()),
            join(&|s| s.val_acc.to_string()),
            opt_cell(row.median_acc()),
            r.iter().map(|s| s.mid_count).sum::<usize>().to_string(),
            mean(&|s| s.mean_loss_s),
            mean(&|s| s.mined_ratio),
            mean(&|s| s.pseudo_precision),
            row.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_ablate(config_path: &Path, out: &Path, threads: usize) -> i32 {
    report((|| {
        let cfg = RunConfig::from_path(config_path)?;
        fs::create_dir_all(out)?;
        fs::write(out.join("config.toml"), cfg.to_toml_string())?;
        let rows = run_ablation(&cfg, threads);
        write_ablation_csv(&rows, &out.join("ablation.csv"))?;
        for row in &rows {
            match (&row.error, row.median_acc()) {
                (None, Some(m)) => println!("{}: median val_acc {m}", row.variant.name),
                (Some(e), _) => println!("{}: failed ({e})", row.variant.name),
                _ => {}
            }
        }
        Ok(())
    })())
}
