//! Datasets: synthetic generators, IDX/CSV ingestion and splitting.
//!
//! [`split`] hands the training loop an [`UnlabeledSet`] that has no label
//! field at all. Ground truth for the unlabeled portion is returned
//! separately as [`UnlabeledTruth`] and is only read by evaluation code.

use std::fs;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::augment::{Image, Sample, SampleData};
use crate::error::{Error, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Samples with ground-truth labels in `0..num_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        Error::check_dim(samples.len(), labels.len())?;
        if num_classes < 2 {
            return Err(Error::param("dataset needs at least 2 classes"));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::param(format!("label {bad} out of range for {num_classes} classes")));
        }
        Ok(Dataset { samples, labels, num_classes })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.samples.first().map_or(0, Sample::dim)
    }

    /// Subset by indices, keeping sample ids.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        self.labels.iter().for_each(|&l| counts[l] += 1);
        counts
    }

    /// Shuffles sample order and renumbers ids to the new positions.
    fn shuffled(self, rng: &mut impl Rng) -> Dataset {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(rng);
        let mut out = self.subset(&order);
        for (i, s) in out.samples.iter_mut().enumerate() {
            s.id = i as u64;
        }
        out
    }
}

/// Unit-variance Gaussian clusters whose centers are pairwise at least
/// `separation` apart.
pub fn gen_blobs(
    num_classes: usize,
    per_class_n: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    check_blob_args(num_classes, dim, separation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = place_centers(num_classes, dim, separation, &mut rng)?;
    Ok(sample_blobs(&centers, per_class_n, &mut rng)?.shuffled(&mut rng))
}

/// Like [`gen_blobs`], except classes 0 and 1 sit exactly `overlap` apart.
/// Every other pair of centers keeps at least `separation`.
pub fn gen_overlapping_blobs(
    num_classes: usize,
    per_class_n: usize,
    dim: usize,
    separation: f64,
    overlap: f64,
    seed: u64,
) -> Result<Dataset> {
    check_blob_args(num_classes, dim, separation)?;
    if overlap.is_nan() || overlap < 0.0 || overlap >= separation {
        return Err(Error::param("overlap must lie in [0, separation)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // class 1 is placed last, next to class 0
    let others = place_centers(num_classes - 1, dim, separation, &mut rng)?;
    let mut partner = None;
    for _ in 0..MAX_PLACEMENT_TRIES {
        let direction = random_unit(dim, &mut rng);
        let c: Vec<f64> = others[0].iter().zip(&direction).map(|(a, d)| a + overlap * d).collect();
        if others[1..].iter().all(|o| distance(o, &c) >= separation) {
            partner = Some(c);
            break;
        }
    }
    let partner = partner.ok_or_else(|| {
        Error::Generation("could not place the overlapping class pair".into())
    })?;
    let mut centers = Vec::with_capacity(num_classes);
    centers.push(others[0].clone());
    centers.push(partner);
    centers.extend(others[1..].iter().cloned());
    Ok(sample_blobs(&centers, per_class_n, &mut rng)?.shuffled(&mut rng))
}

const MAX_PLACEMENT_TRIES: usize = 10_000;

fn check_blob_args(num_classes: usize, dim: usize, separation: f64) -> Result<()> {
    if num_classes < 2 || dim < 2 {
        return Err(Error::param("blobs need at least 2 classes and 2 dimensions"));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::param("separation must be finite and non-negative"));
    }
    Ok(())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn random_unit(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Rejection-samples `n` centers in a box sized to fit them comfortably.
fn place_centers(
    n: usize,
    dim: usize,
    separation: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>> {
    let half = separation.max(1.0) * (n as f64).powf(1.0 / dim as f64);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-half..=half)).collect();
            if centers.iter().all(|o| distance(o, &c) >= separation) {
                centers.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Generation(format!(
                "could not place {n} centers {separation} apart in {dim} dimensions"
            )));
        }
    }
    Ok(centers)
}

fn sample_blobs(centers: &[Vec<f64>], per_class_n: usize, rng: &mut impl Rng) -> Result<Dataset> {
    let mut samples = Vec::with_capacity(centers.len() * per_class_n);
    let mut labels = Vec::with_capacity(samples.capacity());
    for (class, c) in centers.iter().enumerate() {
        for _ in 0..per_class_n {
            let x: Vec<f64> = c.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect();
            samples.push(Sample::vector(samples.len() as u64, x));
            labels.push(class);
        }
    }
    Dataset::new(samples, labels, centers.len())
}

/// Two interleaved half circles with Gaussian noise.
///
/// Class 0 is the upper arc `(cos t, sin t)`; class 1 the lower arc
/// `(1 − cos t, 0.5 − sin t)`, `t ∈ [0, π]` evenly spaced.
pub fn gen_two_moons(n: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n < 10 {
        return Err(Error::param("two moons needs at least 10 samples"));
    }
    if !noise.is_finite() || noise < 0.0 {
        return Err(Error::param("noise must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let arc = |k: usize, count: usize| std::f64::consts::PI * k as f64 / (count - 1) as f64;
    let jitter = Normal::new(0.0, noise.max(f64::MIN_POSITIVE)).expect("valid std");
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n_outer {
        let t = arc(k, n_outer);
        samples.push(vec![t.cos(), t.sin()]);
        labels.push(0);
    }
    for k in 0..n_inner {
        let t = arc(k, n_inner);
        samples.push(vec![1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    let samples = samples
        .into_iter()
        .enumerate()
        .map(|(i, mut x)| {
            if noise > 0.0 {
                x.iter_mut().for_each(|v| *v += jitter.sample(&mut rng));
            }
            Sample::vector(i as u64, x)
        })
        .collect();
    Ok(Dataset::new(samples, labels, 2)?.shuffled(&mut rng))
}

/// Loads an IDX image file (magic `0x00000803`, u8 pixels) and its IDX label
/// file (magic `0x00000801`).
pub fn load_idx_images(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = read_file(images_path)?;
    let labels = read_file(labels_path)?;
    parse_idx(&images, &labels)
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

fn be_u32(bytes: &[u8], at: usize, field: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(field, "file truncated inside header"))
}

/// Parses in-memory IDX image and label buffers.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let magic = be_u32(images, 0, "images.magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format("images.magic", format!("expected 0x00000803, found {magic:#010x}")));
    }
    let count = be_u32(images, 4, "images.count")? as usize;
    let rows = be_u32(images, 8, "images.rows")? as usize;
    let cols = be_u32(images, 12, "images.cols")? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format("images.rows", "image dimensions must be positive"));
    }

    let magic = be_u32(labels, 0, "labels.magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format("labels.magic", format!("expected 0x00000801, found {magic:#010x}")));
    }
    let label_count = be_u32(labels, 4, "labels.count")? as usize;
    if label_count != count {
        return Err(Error::format(
            "labels.count",
            format!("{label_count} labels for {count} images"),
        ));
    }

    let pixel_len = rows * cols;
    let body = &images[16..];
    if body.len() < count * pixel_len {
        return Err(Error::format(
            "images.data",
            format!("expected {} pixel bytes, found {}", count * pixel_len, body.len()),
        ));
    }
    let label_body = &labels[8..];
    if label_body.len() < count {
        return Err(Error::format(
            "labels.data",
            format!("expected {count} label bytes, found {}", label_body.len()),
        ));
    }

    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let pixels = body[i * pixel_len..(i + 1) * pixel_len]
            .iter()
            .map(|&b| f64::from(b) / 255.0)
            .collect();
        samples.push(Sample::image(i as u64, Image::new(rows, cols, 1, pixels)?));
    }
    let labels: Vec<usize> = label_body[..count].iter().map(|&b| usize::from(b)).collect();
    let num_classes = labels.iter().max().map_or(2, |m| (m + 1).max(2));
    Dataset::new(samples, labels, num_classes)
}

/// Reads a CSV with header `f0,…,f{d−1},label`.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let d = headers.len().checked_sub(1).filter(|d| *d > 0).ok_or_else(|| {
        Error::format("header", "need at least one feature column and a label column")
    })?;
    for (i, h) in headers.iter().take(d).enumerate() {
        if h != format!("f{i}") {
            return Err(Error::format("header", format!("column {i} is `{h}`, expected `f{i}`")));
        }
    }
    if &headers[d] != "label" {
        return Err(Error::format("header", "last column must be `label`"));
    }
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let mut x = Vec::with_capacity(d);
        for (i, v) in record.iter().take(d).enumerate() {
            x.push(v.trim().parse::<f64>().map_err(|e| {
                Error::format(format!("row {row}, f{i}"), e.to_string())
            })?);
        }
        let label = record[d]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::format(format!("row {row}, label"), e.to_string()))?;
        samples.push(Sample::vector(row as u64, x));
        labels.push(label);
    }
    let num_classes = labels.iter().max().map_or(2, |m| (m + 1).max(2));
    Dataset::new(samples, labels, num_classes)
}

/// Writes vector samples in the format read by [`load_csv`].
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let d = ds.input_dim();
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(csv_err)?;
    for (s, l) in ds.samples.iter().zip(&ds.labels) {
        let SampleData::Vector(v) = &s.data else {
            return Err(Error::param("CSV export supports vector samples only"));
        };
        let mut row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        row.push(l.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::format("csv", e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub num_labeled: usize,
    pub num_validation: usize,
    pub per_class_balance: bool,
    pub seed: u64,
}

/// Labeled training data.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub samples: Vec<Sample>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

/// Unlabeled training data. Carries no labels.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledSet {
    pub samples: Vec<Sample>,
}

/// Ground truth for [`UnlabeledSet`], position-aligned. Evaluation only.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledTruth {
    labels: Vec<usize>,
}

impl UnlabeledTruth {
    pub fn label(&self, index: usize) -> Option<usize> {
        self.labels.get(index).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Index sets into the source dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub labeled: LabeledSet,
    pub unlabeled: UnlabeledSet,
    pub validation: Dataset,
    pub unlabeled_truth: UnlabeledTruth,
    pub indices: SplitIndices,
}

/// Partitions `ds` into labeled, unlabeled and validation parts.
///
/// With `per_class_balance` the labeled part holds `⌊num_labeled / C⌋`
/// samples of every class. Validation is drawn next; the rest is unlabeled.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    if spec.num_labeled + spec.num_validation > ds.len() {
        return Err(Error::Split(format!(
            "{} labeled + {} validation exceeds {} samples",
            spec.num_labeled,
            spec.num_validation,
            ds.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng);

    let mut taken = vec![false; ds.len()];
    let mut labeled = Vec::new();
    if spec.per_class_balance {
        let c = ds.num_classes();
        let per_class = spec.num_labeled / c;
        if per_class == 0 && spec.num_labeled > 0 {
            return Err(Error::Split(format!(
                "{} balanced labels cannot cover {c} classes",
                spec.num_labeled
            )));
        }
        let mut need = vec![per_class; c];
        for &i in &order {
            let l = ds.labels()[i];
            if need[l] > 0 {
                need[l] -= 1;
                labeled.push(i);
                taken[i] = true;
            }
        }
        if let Some(class) = need.iter().position(|&n| n > 0) {
            return Err(Error::Split(format!(
                "class {class} has fewer than {per_class} samples"
            )));
        }
    } else {
        for &i in order.iter().take(spec.num_labeled) {
            labeled.push(i);
            taken[i] = true;
        }
    }

    let rest: Vec<usize> = order.into_iter().filter(|&i| !taken[i]).collect();
    let (validation, unlabeled) = rest.split_at(spec.num_validation.min(rest.len()));
    let (validation, unlabeled) = (validation.to_vec(), unlabeled.to_vec());

    let lab = ds.subset(&labeled);
    let unl = ds.subset(&unlabeled);
    Ok(Splits {
        labeled: LabeledSet {
            samples: lab.samples,
            labels: lab.labels,
            num_classes: ds.num_classes(),
        },
        unlabeled: UnlabeledSet { samples: unl.samples },
        unlabeled_truth: UnlabeledTruth { labels: unl.labels },
        validation: ds.subset(&validation),
        indices: SplitIndices { labeled, unlabeled, validation },
    })
}

/// Per-feature affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on vector samples; `None` for an empty set or image data.
    /// Constant features keep a scale of 1.
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Option<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for s in samples {
            let SampleData::Vector(v) = &s.data else {
                return None;
            };
            if n == 0 {
                sum = vec![0.0; v.len()];
                sq = vec![0.0; v.len()];
            } else if v.len() != sum.len() {
                return None;
            }
            for (i, &x) in v.iter().enumerate() {
                sum[i] += x;
                sq[i] += x * x;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / nf - m * m).max(0.0);
                if var > 1e-24 { var.sqrt() } else { 1.0 }
            })
            .collect();
        Some(Standardizer { mean, std })
    }

    /// Image samples pass through unchanged.
    pub fn apply(&self, s: &Sample) -> Sample {
        match &s.data {
            SampleData::Vector(v) => Sample::vector(
                s.id,
                v.iter()
                    .zip(self.mean.iter().zip(&self.std))
                    .map(|(x, (m, sd))| (x - m) / sd)
                    .collect(),
            ),
            SampleData::Image(_) => s.clone(),
        }
    }

    pub fn apply_dataset(&self, ds: &Dataset) -> Dataset {
        Dataset {
            samples: ds.samples.iter().map(|s| self.apply(s)).collect(),
            labels: ds.labels.clone(),
            num_classes: ds.num_classes,
        }
    }

    /// Transforms all three parts of `splits` in place.
    pub fn apply_splits(&self, splits: &mut Splits) {
        for s in splits.labeled.samples.iter_mut().chain(&mut splits.unlabeled.samples) {
            *s = self.apply(s);
        }
        splits.validation = self.apply_dataset(&splits.validation);
    }
}
