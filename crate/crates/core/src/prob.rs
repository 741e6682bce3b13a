//! Categorical distributions over classes and the handful of pure operations
//! the training loop needs on them: sharpening, one-hot collapse,
//! Bhattacharyya similarity, averaging and exponential moving averages.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on `Σ p = 1`.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Entries are floored at this value before any `sqrt` or `ln`.
pub const PROB_FLOOR: f64 = 1e-12;

/// A length-C categorical distribution (C ≥ 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {bad} is negative or non-finite"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(ProbVector(values))
    }

    /// Uniform distribution over `num_classes`.
    pub fn uniform(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::param("uniform distribution needs at least 2 classes"));
        }
        Ok(ProbVector(vec![1.0 / num_classes as f64; num_classes]))
    }

    /// Indicator distribution of `class`.
    pub fn indicator(num_classes: usize, class: usize) -> Result<Self> {
        if num_classes < 2 || class >= num_classes {
            return Err(Error::param(format!(
                "class {class} out of range for {num_classes} classes"
            )));
        }
        let mut v = vec![0.0; num_classes];
        v[class] = 1.0;
        Ok(ProbVector(v))
    }

    /// Softmax of `logits`, computed with the usual max shift.
    pub fn softmax(logits: &[f64]) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 logits, got {}",
                logits.len()
            )));
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical("non-finite logits".into()));
        }
        let mut out: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let sum: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= sum);
        Ok(ProbVector(out))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }

    /// Shannon entropy in nats (`0 ln 0 = 0`).
    pub fn entropy(&self) -> f64 {
        self.0
            .iter()
            .filter(|&&p| p > 0.0)
            .fold(0.0, |acc, &p| acc - p * p.ln())
    }

    /// Entries floored at [`PROB_FLOOR`] and renormalized.
    pub fn floored(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.0.iter().map(|p| p.max(PROB_FLOOR)).collect();
        let sum: f64 = v.iter().sum();
        v.iter_mut().for_each(|p| *p /= sum);
        v
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ProbVector::new(values)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Temperature sharpening: `p_c^{1/T} / Σ_c p_c^{1/T}`.
///
/// Evaluated in log space relative to the largest entry so small
/// temperatures do not underflow every coordinate.
pub fn sharpen(p: &ProbVector, temperature: f64) -> Result<ProbVector> {
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::param(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let max = p.max();
    if max <= 0.0 {
        return Err(Error::InvalidDistribution("all-zero input to sharpen".into()));
    }
    let log_max = max.ln();
    let inv_t = 1.0 / temperature;
    let mut out: Vec<f64> = p
        .as_slice()
        .iter()
        .map(|&v| if v > 0.0 { ((v.ln() - log_max) * inv_t).exp() } else { 0.0 })
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    Ok(ProbVector(out))
}

/// Indicator vector of `argmax(p)`.
pub fn one_hot(p: &ProbVector) -> ProbVector {
    let mut v = vec![0.0; p.len()];
    v[p.argmax()] = 1.0;
    ProbVector(v)
}

/// Bhattacharyya coefficient `Σ_c √p_c √q_c`, in `[0, 1]`.
pub fn bhattacharyya(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    Error::check_dim(p.len(), q.len())?;
    let a = p.floored();
    let b = q.floored();
    let s: f64 = a.iter().zip(&b).map(|(x, y)| x.sqrt() * y.sqrt()).sum();
    Ok(s.clamp(0.0, 1.0))
}

/// Elementwise arithmetic mean of equally sized distributions.
pub fn mean_prediction(preds: &[ProbVector]) -> Result<ProbVector> {
    let first = preds
        .first()
        .ok_or_else(|| Error::param("mean of an empty prediction list"))?;
    let mut acc = vec![0.0; first.len()];
    for p in preds {
        Error::check_dim(first.len(), p.len())?;
        acc.iter_mut().zip(p.as_slice()).for_each(|(a, v)| *a += v);
    }
    let n = preds.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(ProbVector(acc))
}

/// `decay · prev + (1 − decay) · new` over plain slices.
pub fn ema_update(prev: &[f64], new: &[f64], decay: f64) -> Result<Vec<f64>> {
    Error::check_dim(prev.len(), new.len())?;
    check_decay(decay)?;
    Ok(prev
        .iter()
        .zip(new)
        .map(|(p, n)| decay * p + (1.0 - decay) * n)
        .collect())
}

/// In-place variant of [`ema_update`].
pub fn ema_update_in_place(prev: &mut [f64], new: &[f64], decay: f64) -> Result<()> {
    Error::check_dim(prev.len(), new.len())?;
    check_decay(decay)?;
    for (p, n) in prev.iter_mut().zip(new) {
        *p = decay * *p + (1.0 - decay) * n;
    }
    Ok(())
}

/// EMA of two distributions; the result is again a distribution.
pub fn ema_prob(prev: &ProbVector, new: &ProbVector, decay: f64) -> Result<ProbVector> {
    ema_update(prev.as_slice(), new.as_slice(), decay).map(ProbVector)
}

fn check_decay(decay: f64) -> Result<()> {
    if (0.0..1.0).contains(&decay) {
        Ok(())
    } else {
        Err(Error::param(format!("decay must lie in [0, 1), got {decay}")))
    }
}
