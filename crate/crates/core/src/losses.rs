//! Loss terms and the dual-threshold gate.
//!
//! Every unlabeled entry (one strong view of one unlabeled sample) is routed
//! to exactly one of three paths:
//!
//! * `HighConf`: `max(q̂) ≥ τ`. Cross-entropy against `one_hot(q̂)` (L_U1).
//! * `MidConf`: `max(q̂) < τ` and `max(q̄) > T_{argmax q̄}`. Squared L2
//!   distance to the soft target `q̂` (L_U2).
//! * `Discarded`: neither.
//!
//! The similar loss (L_S) propagates a high-confidence anchor's one-hot label
//! to the strong view of every other entry whose un-sharpened prediction has
//! Bhattacharyya coefficient above `T_s` with the anchor's.
//!
//! All pseudo-label targets are constants: gradients never flow back into
//! the weak-view predictions that produced them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{bhattacharyya, one_hot, ProbVector, PROB_FLOOR};
use crate::threshold::ThresholdRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Route {
    HighConf,
    MidConf,
    Discarded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateDecision {
    pub route: Route,
    /// `q̂` for the two admitted routes.
    pub anchor: Option<ProbVector>,
}

/// Weights of the three unlabeled terms in the total loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_u1: f64,
    pub lambda_u2: f64,
    pub lambda_s: f64,
}

impl LossWeights {
    pub fn new(lambda_u1: f64, lambda_u2: f64, lambda_s: f64) -> Result<Self> {
        for (name, v) in [("lambda_u1", lambda_u1), ("lambda_u2", lambda_u2), ("lambda_s", lambda_s)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::param(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(LossWeights { lambda_u1, lambda_u2, lambda_s })
    }

    /// All unlabeled terms switched off.
    pub fn supervised_only() -> Self {
        LossWeights { lambda_u1: 0.0, lambda_u2: 0.0, lambda_s: 0.0 }
    }
}

impl Default for LossWeights {
    /// CIFAR-10 weights (3, 225, 16).
    fn default() -> Self {
        LossWeights { lambda_u1: 3.0, lambda_u2: 225.0, lambda_s: 16.0 }
    }
}

/// One unlabeled sample after its weak views have been scored.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledRecord {
    pub sample_id: u64,
    /// Average (or EMA) weak-view prediction.
    pub q_bar: ProbVector,
    /// `sharpen(q̄, T)`.
    pub q_hat: ProbVector,
    /// Model predictions on each strong view.
    pub strong_preds: Vec<ProbVector>,
}

/// One element of the set fed to [`similar_loss`]: a strong view together
/// with its sample's `q̄` and `q̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarTuple<V> {
    pub view: V,
    pub q_bar: ProbVector,
    pub q_hat: ProbVector,
}

/// `−Σ_c target_c · ln(pred_c)` with `pred` floored.
pub fn cross_entropy(target: &ProbVector, pred: &ProbVector) -> Result<f64> {
    Error::check_dim(target.len(), pred.len())?;
    Ok(target
        .as_slice()
        .iter()
        .zip(pred.as_slice())
        .filter(|(t, _)| **t != 0.0)
        .map(|(t, p)| -t * p.max(PROB_FLOOR).ln())
        .sum())
}

/// `Σ_c (a_c − b_c)²`.
pub fn l2_sq(a: &ProbVector, b: &ProbVector) -> Result<f64> {
    Error::check_dim(a.len(), b.len())?;
    Ok(a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

/// Fixed-threshold test, shared by the gate and the similar-loss anchor.
/// Equality with `τ` counts as confident.
pub fn is_confident(q_hat: &ProbVector, tau: f64) -> bool {
    q_hat.max() >= tau
}

/// Routes one entry through the dual threshold.
pub fn gate(
    q_bar: &ProbVector,
    q_hat: &ProbVector,
    tau: f64,
    reg: &ThresholdRegistry,
) -> Result<GateDecision> {
    Error::check_dim(q_bar.len(), q_hat.len())?;
    Error::check_dim(reg.num_classes(), q_bar.len())?;
    let route = if is_confident(q_hat, tau) {
        Route::HighConf
    } else if q_bar.max() > reg.threshold_for(q_bar.argmax())? {
        Route::MidConf
    } else {
        Route::Discarded
    };
    let anchor = (route != Route::Discarded).then(|| q_hat.clone());
    Ok(GateDecision { route, anchor })
}

/// Mean cross-entropy of the model over a labeled batch.
pub fn supervised_loss<S, F>(batch: &[(S, ProbVector)], model_eval: F) -> Result<f64>
where
    F: Fn(&S) -> Result<ProbVector>,
{
    if batch.is_empty() {
        return Err(Error::param("supervised loss over an empty batch"));
    }
    let mut sum = 0.0;
    for (input, label) in batch {
        sum += cross_entropy(label, &model_eval(input)?)?;
    }
    Ok(sum / batch.len() as f64)
}

fn entry_count(records: &[UnlabeledRecord]) -> usize {
    records.iter().map(|r| r.strong_preds.len()).sum()
}

/// High-confidence term: gated cross-entropy against `one_hot(q̂)`,
/// averaged over every (strong view, pseudo label) entry.
pub fn unsup_loss_high(records: &[UnlabeledRecord], tau: f64) -> Result<f64> {
    let n = entry_count(records);
    if n == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for r in records.iter().filter(|r| is_confident(&r.q_hat, tau)) {
        let target = one_hot(&r.q_hat);
        for p in &r.strong_preds {
            sum += cross_entropy(&target, p)?;
        }
    }
    Ok(sum / n as f64)
}

/// Mid-confidence term: gated squared L2 distance to `q̂`, divided by
/// `C · |Û|`.
pub fn unsup_loss_mid(
    records: &[UnlabeledRecord],
    tau: f64,
    reg: &ThresholdRegistry,
    num_classes: usize,
) -> Result<f64> {
    let n = entry_count(records);
    if n == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for r in records {
        if gate(&r.q_bar, &r.q_hat, tau, reg)?.route != Route::MidConf {
            continue;
        }
        for p in &r.strong_preds {
            sum += l2_sq(&r.q_hat, p)?;
        }
    }
    Ok(sum / (num_classes as f64 * n as f64))
}

/// Ordered pairs `(anchor, partner)` that pass both similar-loss gates.
pub fn similar_pairs<V>(
    tuples: &[SimilarTuple<V>],
    tau: f64,
    sim_threshold: f64,
) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    for (i, anchor) in tuples.iter().enumerate() {
        if !is_confident(&anchor.q_hat, tau) {
            continue;
        }
        for (j, partner) in tuples.iter().enumerate() {
            if i != j && bhattacharyya(&anchor.q_bar, &partner.q_bar)? > sim_threshold {
                pairs.push((i, j));
            }
        }
    }
    Ok(pairs)
}

/// Similar loss: cross-entropy between each passing anchor's one-hot label
/// and the model's prediction on the partner's strong view, averaged over
/// all `N(N−1)` ordered pairs.
pub fn similar_loss<V, F>(
    tuples: &[SimilarTuple<V>],
    tau: f64,
    sim_threshold: f64,
    model_eval: F,
) -> Result<f64>
where
    F: Fn(&V) -> Result<ProbVector>,
{
    let n = tuples.len();
    if n < 2 {
        return Ok(0.0);
    }
    let pairs = similar_pairs(tuples, tau, sim_threshold)?;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut preds: Vec<Option<ProbVector>> = vec![None; n];
    let mut sum = 0.0;
    for (i, j) in pairs {
        if preds[j].is_none() {
            preds[j] = Some(model_eval(&tuples[j].view)?);
        }
        let pred = preds[j].as_ref().expect("filled above");
        sum += cross_entropy(&one_hot(&tuples[i].q_hat), pred)?;
    }
    Ok(sum / (n * (n - 1)) as f64)
}

/// Values of the four terms and their weighted sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_x: f64,
    pub l_u1: f64,
    pub l_u2: f64,
    pub l_s: f64,
    pub total: f64,
}

/// `L_X + λ_U1 L_U1 + λ_U2 L_U2 + λ_S L_S`.
pub fn total_loss(l_x: f64, l_u1: f64, l_u2: f64, l_s: f64, w: &LossWeights) -> Result<f64> {
    for (name, v) in [("loss_x", l_x), ("loss_u1", l_u1), ("loss_u2", l_u2), ("loss_s", l_s)] {
        if !v.is_finite() {
            return Err(Error::Numerical(format!("{name} is not finite ({v})")));
        }
    }
    let total = l_x + w.lambda_u1 * l_u1 + w.lambda_u2 * l_u2 + w.lambda_s * l_s;
    if !total.is_finite() {
        return Err(Error::Numerical(format!("total loss is not finite ({total})")));
    }
    Ok(total)
}

/// Gradient of `H(target, softmax(z))` with respect to the logits `z`.
pub fn ce_logit_grad(target: &ProbVector, pred: &ProbVector) -> Vec<f64> {
    let mass: f64 = target.as_slice().iter().sum();
    pred.as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| p * mass - t)
        .collect()
}

/// Vector-Jacobian product of softmax: maps `∂L/∂p` to `∂L/∂z`.
pub fn softmax_vjp(pred: &ProbVector, grad_probs: &[f64]) -> Vec<f64> {
    let p = pred.as_slice();
    let dot: f64 = p.iter().zip(grad_probs).map(|(a, g)| a * g).sum();
    p.iter().zip(grad_probs).map(|(a, g)| a * (g - dot)).collect()
}

/// Gradient of `‖target − softmax(z)‖²` with respect to `z`.
pub fn l2_logit_grad(target: &ProbVector, pred: &ProbVector) -> Vec<f64> {
    let g: Vec<f64> = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| 2.0 * (p - t))
        .collect();
    softmax_vjp(pred, &g)
}
