//! Run configuration as flat dotted keys.
//!
//! ```toml
//! trainer.tau = 0.95
//! data.kind = "overlap_blobs"
//! ablate.similar_loss = [true, false]
//! ```
//!
//! `trainer.tau` is required. Every other key has a default, and unknown
//! keys are rejected. [`RunConfig::to_toml_string`] renders the resolved
//! configuration with every key in a fixed order; parsing that text yields
//! an identical [`RunConfig`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use toml::Value;

use crate::augment::SampleData;
use crate::data::{
    gen_blobs, gen_overlapping_blobs, gen_two_moons, load_csv, load_idx_images, split, Dataset,
    SplitSpec, Splits, Standardizer,
};
use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::model::{Architecture, ConvSpec, InputShape, OptimConfig};
use crate::trainer::{QBarMode, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    TwoMoons,
    Blobs,
    OverlapBlobs,
    Csv,
    Idx,
}

impl DataKind {
    pub fn name(self) -> &'static str {
        match self {
            DataKind::TwoMoons => "two_moons",
            DataKind::Blobs => "blobs",
            DataKind::OverlapBlobs => "overlap_blobs",
            DataKind::Csv => "csv",
            DataKind::Idx => "idx",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "two_moons" => DataKind::TwoMoons,
            "blobs" => DataKind::Blobs,
            "overlap_blobs" => DataKind::OverlapBlobs,
            "csv" => DataKind::Csv,
            "idx" => DataKind::Idx,
            other => {
                return Err(Error::config(
                    "data.kind",
                    format!("unknown kind {other:?}; expected two_moons, blobs, overlap_blobs, csv or idx"),
                ))
            }
        })
    }
}

/// Where samples come from. Generator fields are ignored by file kinds and
/// vice versa.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub kind: DataKind,
    pub n: usize,
    pub noise: f64,
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub overlap: f64,
    pub seed: u64,
    /// CSV file, or IDX image file.
    pub path: String,
    /// IDX label file.
    pub labels_path: String,
    /// Standardize vector features with statistics of the training inputs.
    pub standardize: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            kind: DataKind::TwoMoons,
            n: 1000,
            noise: 0.1,
            classes: 4,
            per_class: 630,
            dim: 2,
            separation: 6.0,
            overlap: 1.5,
            seed: 0,
            path: String::new(),
            labels_path: String::new(),
            standardize: true,
        }
    }
}

impl DataConfig {
    pub fn load(&self) -> Result<Dataset> {
        match self.kind {
            DataKind::TwoMoons => gen_two_moons(self.n, self.noise, self.seed),
            DataKind::Blobs => gen_blobs(self.classes, self.per_class, self.dim, self.separation, self.seed),
            DataKind::OverlapBlobs => gen_overlapping_blobs(
                self.classes,
                self.per_class,
                self.dim,
                self.separation,
                self.overlap,
                self.seed,
            ),
            DataKind::Csv => load_csv(Path::new(&self.path)),
            DataKind::Idx => load_idx_images(Path::new(&self.path), Path::new(&self.labels_path)),
        }
    }

    /// Short human-readable description for manifests.
    pub fn describe(&self) -> String {
        match self.kind {
            DataKind::TwoMoons => format!("two_moons(n={}, noise={}, seed={})", self.n, self.noise, self.seed),
            DataKind::Blobs => format!(
                "blobs(classes={}, per_class={}, dim={}, separation={}, seed={})",
                self.classes, self.per_class, self.dim, self.separation, self.seed
            ),
            DataKind::OverlapBlobs => format!(
                "overlap_blobs(classes={}, per_class={}, dim={}, separation={}, overlap={}, seed={})",
                self.classes, self.per_class, self.dim, self.separation, self.overlap, self.seed
            ),
            DataKind::Csv => format!("csv({})", self.path),
            DataKind::Idx => format!("idx({}, {})", self.path, self.labels_path),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    /// Conv front-end; only valid for image data.
    pub conv: bool,
    pub conv_filters: usize,
    pub conv_kernel: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let conv = ConvSpec::default();
        ModelConfig {
            hidden: vec![64, 64],
            conv: false,
            conv_filters: conv.filters,
            conv_kernel: conv.kernel,
        }
    }
}

impl ModelConfig {
    /// Architecture for inputs shaped like the samples of `ds`.
    pub fn architecture(&self, ds: &Dataset) -> Result<Architecture> {
        let first = ds
            .samples()
            .first()
            .ok_or_else(|| Error::config("data", "dataset is empty"))?;
        let input = match &first.data {
            SampleData::Image(img) => InputShape::Image {
                height: img.height,
                width: img.width,
                channels: img.channels,
            },
            SampleData::Vector(v) => InputShape::Vector { dim: v.len() },
        };
        let arch = Architecture {
            input,
            conv: self.conv.then_some(ConvSpec {
                filters: self.conv_filters,
                kernel: self.conv_kernel,
            }),
            hidden: self.hidden.clone(),
            num_classes: ds.num_classes(),
        };
        arch.validate().map_err(|e| Error::config("model", e.to_string()))?;
        Ok(arch)
    }
}

/// Value lists for the ablation grid. An empty list means "the base value".
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AblationGrid {
    pub adaptive_threshold: Vec<bool>,
    pub similar_loss: Vec<bool>,
    pub tau: Vec<f64>,
    pub sim_threshold: Vec<f64>,
    pub k: Vec<usize>,
    pub temperature: Vec<f64>,
    /// Seeds per variant; empty means the base seed only.
    pub seeds: Vec<u64>,
}

/// Splits ready for training.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub splits: Splits,
    pub arch: Architecture,
    pub standardizer: Option<Standardizer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataConfig,
    pub split: SplitSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub ablate: AblationGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataConfig::default(),
            split: SplitSpec {
                num_labeled: 10,
                num_validation: 200,
                per_class_balance: true,
                seed: 0,
            },
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            ablate: AblationGrid::default(),
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("syntax", e.message().to_string()))?;
        let mut keys = Keys::default();
        flatten("", &table, &mut keys.map);

        let d = DataConfig::default();
        let data = DataConfig {
            kind: DataKind::parse(&keys.string("data.kind", d.kind.name())?)?,
            n: keys.usize("data.n", d.n)?,
            noise: keys.f64("data.noise", d.noise)?,
            classes: keys.usize("data.classes", d.classes)?,
            per_class: keys.usize("data.per_class", d.per_class)?,
            dim: keys.usize("data.dim", d.dim)?,
            separation: keys.f64("data.separation", d.separation)?,
            overlap: keys.f64("data.overlap", d.overlap)?,
            seed: keys.u64("data.seed", d.seed)?,
            path: keys.string("data.path", &d.path)?,
            labels_path: keys.string("data.labels_path", &d.labels_path)?,
            standardize: keys.bool("data.standardize", d.standardize)?,
        };

        let s = RunConfig::default().split;
        let split = SplitSpec {
            num_labeled: keys.usize("split.num_labeled", s.num_labeled)?,
            num_validation: keys.usize("split.num_validation", s.num_validation)?,
            per_class_balance: keys.bool("split.balanced", s.per_class_balance)?,
            seed: keys.u64("split.seed", s.seed)?,
        };

        let m = ModelConfig::default();
        let model = ModelConfig {
            hidden: keys.list("model.hidden", m.hidden, as_usize)?,
            conv: keys.bool("model.conv", m.conv)?,
            conv_filters: keys.usize("model.conv_filters", m.conv_filters)?,
            conv_kernel: keys.usize("model.conv_kernel", m.conv_kernel)?,
        };

        let t = TrainConfig::default();
        let o = t.optim;
        let tau = keys.required_f64("trainer.tau")?;
        let q_bar_mode = match keys.string("trainer.q_bar_mode", "view_average")?.as_str() {
            "view_average" => {
                keys.f64("trainer.q_bar_ema_decay", 0.999)?;
                QBarMode::ViewAverage
            }
            "ema" => QBarMode::CrossEpochEma {
                decay: keys.f64("trainer.q_bar_ema_decay", 0.999)?,
            },
            other => {
                return Err(Error::config(
                    "trainer.q_bar_mode",
                    format!("unknown mode {other:?}; expected view_average or ema"),
                ))
            }
        };
        let train = TrainConfig {
            tau,
            sim_threshold: keys.f64("trainer.sim_threshold", t.sim_threshold)?,
            temperature: keys.f64("trainer.temperature", t.temperature)?,
            k_weak: keys.usize("trainer.k", t.k_weak)?,
            k_strong: keys.usize("trainer.k_strong", t.k_strong)?,
            weights: LossWeights {
                lambda_u1: keys.f64("trainer.lambda_u1", t.weights.lambda_u1)?,
                lambda_u2: keys.f64("trainer.lambda_u2", t.weights.lambda_u2)?,
                lambda_s: keys.f64("trainer.lambda_s", t.weights.lambda_s)?,
            },
            batch_size: keys.usize("trainer.batch_size", t.batch_size)?,
            epochs: keys.usize("trainer.epochs", t.epochs)?,
            iterations_per_epoch: keys.usize("trainer.iterations", t.iterations_per_epoch)?,
            optim: OptimConfig {
                base_lr: keys.f64("optim.lr", o.base_lr)?,
                weight_decay: keys.f64("optim.weight_decay", o.weight_decay)?,
                momentum: keys.f64("optim.momentum", o.momentum)?,
                ema_decay: keys.f64("optim.ema_decay", o.ema_decay)?,
            },
            use_adaptive_threshold: keys.bool("trainer.adaptive_threshold", t.use_adaptive_threshold)?,
            use_similar_loss: keys.bool("trainer.similar_loss", t.use_similar_loss)?,
            q_bar_mode,
            strong_ops: keys.usize("augment.strong_ops", t.strong_ops)?,
            magnitude: keys.f64("augment.magnitude", t.magnitude)?,
            eval_with_ema: keys.bool("trainer.eval_ema", t.eval_with_ema)?,
            seed: keys.u64("trainer.seed", t.seed)?,
        };

        let ablate = AblationGrid {
            adaptive_threshold: keys.list("ablate.adaptive_threshold", vec![], as_bool)?,
            similar_loss: keys.list("ablate.similar_loss", vec![], as_bool)?,
            tau: keys.list("ablate.tau", vec![], as_f64)?,
            sim_threshold: keys.list("ablate.sim_threshold", vec![], as_f64)?,
            k: keys.list("ablate.k", vec![], as_usize)?,
            temperature: keys.list("ablate.temperature", vec![], as_f64)?,
            seeds: keys.list("ablate.seeds", vec![], |v| as_usize(v).map(|x| x as u64))?,
        };

        keys.finish()?;
        let cfg = RunConfig { data, split, model, train, ablate };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let d = &self.data;
        match d.kind {
            DataKind::TwoMoons => {
                if d.n < 2 {
                    return Err(Error::config("data.n", "needs at least 2 samples"));
                }
                if !d.noise.is_finite() || d.noise < 0.0 {
                    return Err(Error::config("data.noise", "must be finite and non-negative"));
                }
            }
            DataKind::Blobs | DataKind::OverlapBlobs => {
                if d.classes < 2 {
                    return Err(Error::config("data.classes", "needs at least 2 classes"));
                }
                if d.dim == 0 {
                    return Err(Error::config("data.dim", "must be positive"));
                }
                if !d.separation.is_finite() || d.separation <= 0.0 {
                    return Err(Error::config("data.separation", "must be positive"));
                }
                if d.kind == DataKind::OverlapBlobs && !(0.0..d.separation).contains(&d.overlap) {
                    return Err(Error::config("data.overlap", "must lie in [0, data.separation)"));
                }
            }
            DataKind::Csv => {
                if d.path.is_empty() {
                    return Err(Error::config("data.path", "required for csv data"));
                }
            }
            DataKind::Idx => {
                if d.path.is_empty() {
                    return Err(Error::config("data.path", "required for idx data"));
                }
                if d.labels_path.is_empty() {
                    return Err(Error::config("data.labels_path", "required for idx data"));
                }
            }
        }
        if self.split.num_labeled == 0 {
            return Err(Error::config("split.num_labeled", "must be at least 1"));
        }
        if self.model.hidden.contains(&0) {
            return Err(Error::config("model.hidden", "widths must be positive"));
        }
        let a = &self.ablate;
        for (key, v) in a.tau.iter().map(|v| ("ablate.tau", v))
            .chain(a.sim_threshold.iter().map(|v| ("ablate.sim_threshold", v)))
            .chain(a.temperature.iter().map(|v| ("ablate.temperature", v)))
        {
            if !(*v > 0.0 && *v <= 1.0) {
                return Err(Error::config(key, format!("values must lie in (0, 1], got {v}")));
            }
        }
        if a.k.contains(&0) {
            return Err(Error::config("ablate.k", "values must be at least 1"));
        }
        Ok(())
    }

    /// Same configuration with both the training and the split seed set to `seed`.
    pub fn with_seed(&self, seed: u64) -> RunConfig {
        let mut cfg = self.clone();
        cfg.train.seed = seed;
        cfg.split.seed = seed;
        cfg
    }

    /// Loads the dataset, splits it and derives the architecture, without
    /// any feature transform.
    ///
    /// Generation and split failures are reported as config errors, since
    /// they follow from the configured sizes.
    pub fn prepare_raw(&self) -> Result<(Splits, Architecture)> {
        let ds = self.data.load().map_err(|e| match e {
            Error::Generation(m) | Error::InvalidParameter(m) => Error::config("data", m),
            other => other,
        })?;
        let arch = self.model.architecture(&ds)?;
        let splits = split(&ds, &self.split).map_err(|e| match e {
            Error::Split(m) => Error::config("split", m),
            other => other,
        })?;
        if splits.unlabeled.samples.is_empty() {
            return Err(Error::config("split", "no samples left for the unlabeled set"));
        }
        Ok((splits, arch))
    }

    /// [`prepare_raw`](Self::prepare_raw), then standardization fitted on the
    /// labeled and unlabeled inputs when `data.standardize` is set.
    pub fn prepare(&self) -> Result<Prepared> {
        let (mut splits, arch) = self.prepare_raw()?;
        let standardizer = if self.data.standardize {
            Standardizer::fit(splits.labeled.samples.iter().chain(&splits.unlabeled.samples))
        } else {
            None
        };
        if let Some(st) = &standardizer {
            st.apply_splits(&mut splits);
        }
        Ok(Prepared { splits, arch, standardizer })
    }

    /// Canonical text form: every key, fixed order, one per line.
    pub fn to_toml_string(&self) -> String {
        let d = &self.data;
        let t = &self.train;
        let a = &self.ablate;
        let (mode, decay) = match t.q_bar_mode {
            QBarMode::ViewAverage => ("view_average", 0.999),
            QBarMode::CrossEpochEma { decay } => ("ema", decay),
        };
        let entries: Vec<(&str, Value)> = vec![
            ("data.kind", d.kind.name().into()),
            ("data.n", int(d.n)),
            ("data.noise", d.noise.into()),
            ("data.classes", int(d.classes)),
            ("data.per_class", int(d.per_class)),
            ("data.dim", int(d.dim)),
            ("data.separation", d.separation.into()),
            ("data.overlap", d.overlap.into()),
            ("data.seed", int(d.seed)),
            ("data.path", d.path.as_str().into()),
            ("data.labels_path", d.labels_path.as_str().into()),
            ("data.standardize", d.standardize.into()),
            ("split.num_labeled", int(self.split.num_labeled)),
            ("split.num_validation", int(self.split.num_validation)),
            ("split.balanced", self.split.per_class_balance.into()),
            ("split.seed", int(self.split.seed)),
            ("model.hidden", ints(&self.model.hidden)),
            ("model.conv", self.model.conv.into()),
            ("model.conv_filters", int(self.model.conv_filters)),
            ("model.conv_kernel", int(self.model.conv_kernel)),
            ("optim.lr", t.optim.base_lr.into()),
            ("optim.weight_decay", t.optim.weight_decay.into()),
            ("optim.momentum", t.optim.momentum.into()),
            ("optim.ema_decay", t.optim.ema_decay.into()),
            ("augment.strong_ops", int(t.strong_ops)),
            ("augment.magnitude", t.magnitude.into()),
            ("trainer.tau", t.tau.into()),
            ("trainer.sim_threshold", t.sim_threshold.into()),
            ("trainer.temperature", t.temperature.into()),
            ("trainer.k", int(t.k_weak)),
            ("trainer.k_strong", int(t.k_strong)),
            ("trainer.lambda_u1", t.weights.lambda_u1.into()),
            ("trainer.lambda_u2", t.weights.lambda_u2.into()),
            ("trainer.lambda_s", t.weights.lambda_s.into()),
            ("trainer.batch_size", int(t.batch_size)),
            ("trainer.epochs", int(t.epochs)),
            ("trainer.iterations", int(t.iterations_per_epoch)),
            ("trainer.adaptive_threshold", t.use_adaptive_threshold.into()),
            ("trainer.similar_loss", t.use_similar_loss.into()),
            ("trainer.q_bar_mode", mode.into()),
            ("trainer.q_bar_ema_decay", decay.into()),
            ("trainer.eval_ema", t.eval_with_ema.into()),
            ("trainer.seed", int(t.seed)),
            ("ablate.adaptive_threshold", Value::Array(a.adaptive_threshold.iter().map(|&b| b.into()).collect())),
            ("ablate.similar_loss", Value::Array(a.similar_loss.iter().map(|&b| b.into()).collect())),
            ("ablate.tau", floats(&a.tau)),
            ("ablate.sim_threshold", floats(&a.sim_threshold)),
            ("ablate.k", ints(&a.k)),
            ("ablate.temperature", floats(&a.temperature)),
            ("ablate.seeds", ints(&a.seeds)),
        ];
        let mut out = String::new();
        for (key, value) in entries {
            writeln!(out, "{key} = {value}").expect("writing to a String");
        }
        out
    }
}

fn int<T: TryInto<i64>>(v: T) -> Value {
    Value::Integer(v.try_into().unwrap_or(i64::MAX))
}

fn ints<T: Copy + TryInto<i64>>(v: &[T]) -> Value {
    Value::Array(v.iter().map(|&x| int(x)).collect())
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| x.into()).collect())
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn as_usize(v: &Value) -> Option<usize> {
    v.as_integer().and_then(|i| usize::try_from(i).ok())
}

fn as_bool(v: &Value) -> Option<bool> {
    v.as_bool()
}

#[derive(Default)]
struct Keys {
    map: BTreeMap<String, Value>,
    used: BTreeSet<String>,
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<&Value> {
        self.used.insert(key.to_string());
        self.map.get(key)
    }

    fn typed<T>(&mut self, key: &str, default: T, what: &str, conv: impl Fn(&Value) -> Option<T>) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => conv(v).ok_or_else(|| Error::config(key, format!("expected {what}, got {v}"))),
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        self.typed(key, default, "a number", as_f64)
    }

    fn required_f64(&mut self, key: &str) -> Result<f64> {
        if !self.map.contains_key(key) {
            let field = key.rsplit('.').next().unwrap_or(key);
            return Err(Error::config(key, format!("required field `{field}` is missing")));
        }
        self.f64(key, f64::NAN)
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        self.typed(key, default, "a non-negative integer", as_usize)
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64> {
        self.typed(key, default, "a non-negative integer", |v| {
            v.as_integer().and_then(|i| u64::try_from(i).ok())
        })
    }

    fn bool(&mut self, key: &str, default: bool) -> Result<bool> {
        self.typed(key, default, "a boolean", as_bool)
    }

    fn string(&mut self, key: &str, default: &str) -> Result<String> {
        self.typed(key, default.to_string(), "a string", |v| v.as_str().map(str::to_string))
    }

    fn list<T>(&mut self, key: &str, default: Vec<T>, conv: impl Fn(&Value) -> Option<T>) -> Result<Vec<T>> {
        match self.take(key) {
            None => Ok(default),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| conv(v).ok_or_else(|| Error::config(key, format!("bad list element {v}"))))
                .collect(),
            Some(v) => Err(Error::config(key, format!("expected a list, got {v}"))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().find(|k| !self.used.contains(*k)) {
            Some(k) => Err(Error::config(k.clone(), "unknown key")),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_toml_str("trainer.tau = 0.95\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.train.sim_threshold, 0.9);
        assert_eq!(cfg.train.weights, LossWeights::default());
        assert_eq!(cfg.train.optim.base_lr, 0.03);
    }

    #[test]
    fn missing_tau_is_named() {
        let err = RunConfig::from_toml_str("trainer.k = 2\n").unwrap_err();
        match err {
            Error::Config { key, message } => {
                assert_eq!(key, "trainer.tau");
                assert!(message.contains("tau"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_mistyped_keys_are_rejected() {
        let err = RunConfig::from_toml_str("trainer.tau = 0.9\ntrainer.tua = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { key, .. } if key == "trainer.tua"));
        let err = RunConfig::from_toml_str("trainer.tau = \"high\"\n").unwrap_err();
        assert!(matches!(err, Error::Config { key, .. } if key == "trainer.tau"));
        let err = RunConfig::from_toml_str("trainer.tau = 0.9\ntrainer.k = -1\n").unwrap_err();
        assert!(matches!(err, Error::Config { key, .. } if key == "trainer.k"));
        let err = RunConfig::from_toml_str("trainer.tau = 1.2\n").unwrap_err();
        assert!(matches!(err, Error::Config { key, .. } if key == "trainer.tau"));
    }

    #[test]
    fn nested_tables_and_integer_floats() {
        let text = "[trainer]\ntau = 1\nlambda_s = 0\n[data]\nkind = \"blobs\"\n";
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.train.tau, 1.0);
        assert_eq!(cfg.train.weights.lambda_s, 0.0);
        assert_eq!(cfg.data.kind, DataKind::Blobs);
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.train.tau = 0.1 + 0.2;
        cfg.train.q_bar_mode = QBarMode::CrossEpochEma { decay: 0.99 };
        cfg.train.weights.lambda_u2 = 3.0;
        cfg.data.kind = DataKind::Csv;
        cfg.data.path = "some \"quoted\" path.csv".into();
        cfg.ablate.tau = vec![0.9, 0.95];
        cfg.ablate.similar_loss = vec![true, false];
        cfg.ablate.seeds = vec![1, 2, 3];
        cfg.model.hidden = vec![16];
        let text = cfg.to_toml_string();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml_string(), text);
    }

    #[test]
    fn prepare_builds_splits_and_arch() {
        let text = "trainer.tau = 0.95\ndata.n = 200\nsplit.num_validation = 50\n";
        let cfg = RunConfig::from_toml_str(text).unwrap();
        let Prepared { splits, arch, standardizer } = cfg.prepare().unwrap();
        assert!(standardizer.is_some());
        assert_eq!(splits.labeled.samples.len(), 10);
        assert_eq!(splits.validation.len(), 50);
        assert_eq!(splits.unlabeled.samples.len(), 140);
        assert_eq!(arch, Architecture::mlp(2, 2));

        let too_big = "trainer.tau = 0.95\ndata.n = 100\nsplit.num_validation = 200\n";
        let err = RunConfig::from_toml_str(too_big).unwrap().prepare().unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }
}
