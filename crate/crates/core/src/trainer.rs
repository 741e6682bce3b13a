//! The training loop: one step, one epoch, a full run, and evaluation.
//!
//! A step is split in two. [`prepare_step`] does everything that depends on
//! the pre-update model but is treated as constant during differentiation:
//! augmentation, threshold observations, `q̄`/`q̂`, routing and similar-pair
//! selection. [`objective`] then evaluates the total loss and its exact
//! gradient for any parameter vector against that frozen plan.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{view_seed, Augmenter, FeatureRange, Sample};
use crate::data::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::losses::{
    ce_logit_grad, cross_entropy, gate, l2_logit_grad, l2_sq, similar_pairs, total_loss,
    LossBreakdown, LossWeights, Route, SimilarTuple,
};
use crate::model::{sgd_step, Architecture, Classifier, Gradients, ModelParams, OptimConfig, OptimState};
use crate::prob::{ema_prob, mean_prediction, one_hot, sharpen, ProbVector};
use crate::threshold::ThresholdRegistry;

const LABELED_STREAM: u64 = 1;
const UNLABELED_STREAM: u64 = 2;
const STEP_STREAM: u64 = 3;
const INIT_STREAM: u64 = 4;

/// How the averaged weak-view prediction `q̄` is formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QBarMode {
    /// Mean over the current step's `K` weak views.
    ViewAverage,
    /// Per-sample running average across visits, keyed by sample id.
    CrossEpochEma { decay: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub tau: f64,
    pub sim_threshold: f64,
    pub temperature: f64,
    /// Weak views per unlabeled sample.
    pub k_weak: usize,
    /// Strong views per unlabeled sample.
    pub k_strong: usize,
    pub weights: LossWeights,
    pub batch_size: usize,
    pub epochs: usize,
    pub iterations_per_epoch: usize,
    pub optim: OptimConfig,
    pub use_adaptive_threshold: bool,
    pub use_similar_loss: bool,
    pub q_bar_mode: QBarMode,
    pub strong_ops: usize,
    pub magnitude: f64,
    /// Evaluate with the EMA shadow weights rather than the live ones.
    pub eval_with_ema: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tau: 0.95,
            sim_threshold: 0.9,
            temperature: 0.5,
            k_weak: 2,
            k_strong: 1,
            weights: LossWeights::default(),
            batch_size: 32,
            epochs: 20,
            iterations_per_epoch: 50,
            optim: OptimConfig::default(),
            use_adaptive_threshold: true,
            use_similar_loss: true,
            q_bar_mode: QBarMode::ViewAverage,
            strong_ops: crate::augment::DEFAULT_STRONG_OPS,
            magnitude: crate::augment::DEFAULT_MAGNITUDE,
            eval_with_ema: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Checks every field; errors name the offending config key.
    pub fn validate(&self) -> Result<()> {
        let unit = |key: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(key, format!("must lie in (0, 1], got {v}")))
            }
        };
        unit("trainer.tau", self.tau)?;
        unit("trainer.sim_threshold", self.sim_threshold)?;
        unit("trainer.temperature", self.temperature)?;
        let positive = |key: &str, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::config(key, "must be at least 1"))
            }
        };
        positive("trainer.k", self.k_weak)?;
        positive("trainer.k_strong", self.k_strong)?;
        positive("trainer.batch_size", self.batch_size)?;
        positive("trainer.epochs", self.epochs)?;
        positive("trainer.iterations", self.iterations_per_epoch)?;
        for (key, v) in [
            ("trainer.lambda_u1", self.weights.lambda_u1),
            ("trainer.lambda_u2", self.weights.lambda_u2),
            ("trainer.lambda_s", self.weights.lambda_s),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(key, format!("must be finite and non-negative, got {v}")));
            }
        }
        let o = &self.optim;
        if !o.base_lr.is_finite() || o.base_lr <= 0.0 {
            return Err(Error::config("optim.lr", format!("must be positive, got {}", o.base_lr)));
        }
        if !o.weight_decay.is_finite() || o.weight_decay < 0.0 {
            return Err(Error::config("optim.weight_decay", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&o.momentum) {
            return Err(Error::config("optim.momentum", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&o.ema_decay) {
            return Err(Error::config("optim.ema_decay", "must lie in [0, 1)"));
        }
        if let QBarMode::CrossEpochEma { decay } = self.q_bar_mode {
            if !(0.0..1.0).contains(&decay) {
                return Err(Error::config("trainer.q_bar_ema_decay", "must lie in [0, 1)"));
            }
        }
        if !(0.0..=1.0).contains(&self.magnitude) {
            return Err(Error::config("augment.magnitude", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        (self.epochs * self.iterations_per_epoch) as u64
    }
}

/// Everything that evolves during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub opt: OptimState,
    pub reg: ThresholdRegistry,
    /// Cross-epoch `q̄` memory, only filled in [`QBarMode::CrossEpochEma`].
    pub q_bar_memory: BTreeMap<u64, ProbVector>,
    /// Number of completed epochs.
    pub epoch: usize,
}

impl TrainState {
    pub fn new(arch: Architecture, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let params = ModelParams::init(arch, view_seed(cfg.seed, INIT_STREAM, 0))?;
        let opt = OptimState::new(&params, cfg.optim, cfg.total_steps())?;
        let reg = ThresholdRegistry::new(params.num_classes())?;
        Ok(TrainState {
            params,
            opt,
            reg,
            q_bar_memory: BTreeMap::new(),
            epoch: 0,
        })
    }

    /// The weights used for validation under `cfg`.
    pub fn eval_params(&self, cfg: &TrainConfig) -> &ModelParams {
        if cfg.eval_with_ema {
            &self.opt.ema_params
        } else {
            &self.params
        }
    }
}

/// One strong view with its frozen pseudo-label target and route.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    /// Position of the owning sample in the unlabeled batch.
    pub batch_index: usize,
    pub input: Vec<f64>,
    pub q_bar: ProbVector,
    pub q_hat: ProbVector,
    pub route: Route,
}

/// The constant part of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub labeled_inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub entries: Vec<PlanEntry>,
    /// Ordered `(anchor, partner)` entry pairs for the similar loss.
    pub similar_pairs: Vec<(usize, usize)>,
    pub num_classes: usize,
    pub weights: LossWeights,
}

/// Per-step counters and losses.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub losses: LossBreakdown,
    pub high_count: usize,
    pub mid_count: usize,
    pub discard_count: usize,
    /// Batch position and pseudo label of every non-discarded entry.
    pub pseudo_labels: Vec<(usize, usize)>,
}

/// Weak-augments inputs, observes thresholds, forms `q̄` and `q̂`, and routes
/// every strong view. Mutates the registry and the `q̄` memory.
pub fn prepare_step(
    labeled: &[(&Sample, usize)],
    unlabeled: &[&Sample],
    state: &mut TrainState,
    cfg: &TrainConfig,
    aug: &Augmenter,
    step_seed: u64,
) -> Result<StepPlan> {
    if labeled.is_empty() {
        return Err(Error::param("labeled batch is empty"));
    }
    let num_classes = state.params.num_classes();
    let labeled_seed = view_seed(step_seed, LABELED_STREAM, 0);
    let unlabeled_seed = view_seed(step_seed, UNLABELED_STREAM, 0);

    let mut labeled_inputs = Vec::with_capacity(labeled.len());
    let mut labels = Vec::with_capacity(labeled.len());
    for (slot, &(sample, label)) in labeled.iter().enumerate() {
        let view = aug.weak(sample, view_seed(labeled_seed, sample.id, slot as u64));
        let pred = state.params.forward(&view)?;
        state.reg.observe_labeled(label, &pred)?;
        labeled_inputs.push(view.features().to_vec());
        labels.push(label);
    }

    let k = cfg.k_weak as u64;
    let mut entries = Vec::with_capacity(unlabeled.len() * cfg.k_strong);
    for (b, sample) in unlabeled.iter().enumerate() {
        let base = view_seed(unlabeled_seed, sample.id, b as u64);
        let mut weak_preds = Vec::with_capacity(cfg.k_weak);
        for v in 0..k {
            weak_preds.push(state.params.forward(&aug.weak(sample, view_seed(base, v, 0)))?);
        }
        let avg = mean_prediction(&weak_preds)?;
        let q_bar = match cfg.q_bar_mode {
            QBarMode::ViewAverage => avg,
            QBarMode::CrossEpochEma { decay } => {
                let next = match state.q_bar_memory.get(&sample.id) {
                    Some(prev) => ema_prob(prev, &avg, decay)?,
                    None => avg,
                };
                state.q_bar_memory.insert(sample.id, next.clone());
                next
            }
        };
        let q_hat = sharpen(&q_bar, cfg.temperature)?;
        let mut route = gate(&q_bar, &q_hat, cfg.tau, &state.reg)?.route;
        if route == Route::MidConf && !cfg.use_adaptive_threshold {
            route = Route::Discarded;
        }
        for s in 0..cfg.k_strong as u64 {
            let view = aug.strong(sample, view_seed(base, k + s, 1));
            entries.push(PlanEntry {
                batch_index: b,
                input: view.features().to_vec(),
                q_bar: q_bar.clone(),
                q_hat: q_hat.clone(),
                route,
            });
        }
    }

    let similar_pairs = if cfg.use_similar_loss {
        let tuples: Vec<SimilarTuple<()>> = entries
            .iter()
            .map(|e| SimilarTuple {
                view: (),
                q_bar: e.q_bar.clone(),
                q_hat: e.q_hat.clone(),
            })
            .collect();
        similar_pairs(&tuples, cfg.tau, cfg.sim_threshold)?
    } else {
        Vec::new()
    };

    Ok(StepPlan {
        labeled_inputs,
        labels,
        entries,
        similar_pairs,
        num_classes,
        weights: cfg.weights,
    })
}

/// Total loss of `params` on a frozen plan, with its exact gradient.
///
/// Routes, pairs and pseudo-label targets are constants; terms whose weight
/// is zero contribute their value but no gradient.
pub fn objective(params: &ModelParams, plan: &StepPlan) -> Result<(LossBreakdown, Gradients)> {
    let c = plan.num_classes;
    let w = &plan.weights;
    let mut grads = Gradients::zeros(params.values().len());

    let b = plan.labeled_inputs.len() as f64;
    let mut l_x = 0.0;
    for (input, &label) in plan.labeled_inputs.iter().zip(&plan.labels) {
        let cache = params.forward_cached(input)?;
        let target = ProbVector::indicator(c, label)?;
        l_x += cross_entropy(&target, &cache.probs)?;
        let g: Vec<f64> = ce_logit_grad(&target, &cache.probs).iter().map(|v| v / b).collect();
        params.accumulate_backward(&cache, &g, &mut grads)?;
    }
    l_x /= b;

    let n = plan.entries.len();
    let (mut l_u1, mut l_u2, mut l_s) = (0.0, 0.0, 0.0);
    if n > 0 {
        let nf = n as f64;
        let pair_norm = if n > 1 { (n * (n - 1)) as f64 } else { 1.0 };
        let mut partners: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j) in &plan.similar_pairs {
            partners[j].push(i);
        }
        for (j, e) in plan.entries.iter().enumerate() {
            if e.route == Route::Discarded && partners[j].is_empty() {
                continue;
            }
            let cache = params.forward_cached(&e.input)?;
            let mut g = vec![0.0; c];
            let mut touched = false;
            match e.route {
                Route::HighConf => {
                    let target = one_hot(&e.q_hat);
                    l_u1 += cross_entropy(&target, &cache.probs)?;
                    if w.lambda_u1 != 0.0 {
                        let scale = w.lambda_u1 / nf;
                        add_scaled(&mut g, &ce_logit_grad(&target, &cache.probs), scale);
                        touched = true;
                    }
                }
                Route::MidConf => {
                    l_u2 += l2_sq(&e.q_hat, &cache.probs)?;
                    if w.lambda_u2 != 0.0 {
                        let scale = w.lambda_u2 / (c as f64 * nf);
                        add_scaled(&mut g, &l2_logit_grad(&e.q_hat, &cache.probs), scale);
                        touched = true;
                    }
                }
                Route::Discarded => {}
            }
            for &i in &partners[j] {
                let target = one_hot(&plan.entries[i].q_hat);
                l_s += cross_entropy(&target, &cache.probs)?;
                if w.lambda_s != 0.0 {
                    add_scaled(&mut g, &ce_logit_grad(&target, &cache.probs), w.lambda_s / pair_norm);
                    touched = true;
                }
            }
            if touched {
                params.accumulate_backward(&cache, &g, &mut grads)?;
            }
        }
        l_u1 /= nf;
        l_u2 /= c as f64 * nf;
        l_s /= pair_norm;
    }

    let total = total_loss(l_x, l_u1, l_u2, l_s, w)?;
    Ok((LossBreakdown { l_x, l_u1, l_u2, l_s, total }, grads))
}

fn add_scaled(acc: &mut [f64], g: &[f64], scale: f64) {
    acc.iter_mut().zip(g).for_each(|(a, v)| *a += scale * v);
}

/// One full step: plan, objective, optimizer update.
pub fn train_step(
    labeled: &[(&Sample, usize)],
    unlabeled: &[&Sample],
    state: &mut TrainState,
    cfg: &TrainConfig,
    aug: &Augmenter,
    step_seed: u64,
) -> Result<StepMetrics> {
    let plan = prepare_step(labeled, unlabeled, state, cfg, aug, step_seed)?;
    let (losses, grads) = objective(&state.params, &plan)?;
    sgd_step(&mut state.params, &grads, &mut state.opt)?;

    let mut m = StepMetrics {
        losses,
        high_count: 0,
        mid_count: 0,
        discard_count: 0,
        pseudo_labels: Vec::new(),
    };
    for e in &plan.entries {
        match e.route {
            Route::HighConf => m.high_count += 1,
            Route::MidConf => m.mid_count += 1,
            Route::Discarded => m.discard_count += 1,
        }
        if e.route != Route::Discarded {
            m.pseudo_labels.push((e.batch_index, e.q_hat.argmax()));
        }
    }
    Ok(m)
}

/// Endless stream of index batches over `0..len`, reshuffled on every pass.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(len: usize, seed: u64) -> Result<Self> {
        if len == 0 {
            return Err(Error::param("cannot sample batches from an empty set"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        Ok(BatchSampler { order, pos: 0, rng })
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Sampler seeds for one epoch: `(labeled, unlabeled)`.
pub fn epoch_sampler_seeds(seed: u64, epoch: usize) -> (u64, u64) {
    (
        view_seed(seed, LABELED_STREAM, epoch as u64),
        view_seed(seed, UNLABELED_STREAM, epoch as u64),
    )
}

/// Seed for the augmentation of global step `step`.
pub fn step_seed(seed: u64, step: u64) -> u64 {
    view_seed(seed, STEP_STREAM, step)
}

/// The augmenter a run uses: configured ops, clipped to the range observed
/// over all training inputs.
pub fn run_augmenter(splits: &Splits, cfg: &TrainConfig) -> Result<Augmenter> {
    let range = FeatureRange::observe(splits.labeled.samples.iter().chain(&splits.unlabeled.samples));
    Augmenter::new(cfg.strong_ops, cfg.magnitude, range)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss_x: f64,
    pub loss_u1: f64,
    pub loss_u2: f64,
    pub loss_s: f64,
    pub loss_total: f64,
    pub high_count: usize,
    pub mid_count: usize,
    pub discard_count: usize,
    /// `mid_count` over all unlabeled views.
    pub mined_ratio: f64,
    /// Fraction of non-discarded pseudo labels that match the hidden truth;
    /// 0 when nothing was admitted.
    pub pseudo_precision: f64,
    /// `None` when the validation split is empty.
    pub val_acc: Option<f64>,
    pub thresholds: Vec<f64>,
}

/// One epoch: resets scratch thresholds, runs the configured steps, promotes
/// thresholds and evaluates.
pub fn train_epoch(
    state: &mut TrainState,
    cfg: &TrainConfig,
    splits: &Splits,
    aug: &Augmenter,
) -> Result<EpochMetrics> {
    let epoch = state.epoch;
    let (ls, us) = epoch_sampler_seeds(cfg.seed, epoch);
    let mut lab_sampler = BatchSampler::new(splits.labeled.samples.len(), ls)?;
    let mut unl_sampler = BatchSampler::new(splits.unlabeled.samples.len(), us)?;

    state.reg.begin_epoch();
    let mut sums = LossBreakdown::default();
    let (mut high, mut mid, mut discard) = (0, 0, 0);
    let (mut admitted, mut correct) = (0usize, 0usize);
    for it in 0..cfg.iterations_per_epoch {
        let lab_idx = lab_sampler.next_batch(cfg.batch_size);
        let unl_idx = unl_sampler.next_batch(cfg.batch_size);
        let labeled: Vec<(&Sample, usize)> = lab_idx
            .iter()
            .map(|&i| (&splits.labeled.samples[i], splits.labeled.labels[i]))
            .collect();
        let unlabeled: Vec<&Sample> = unl_idx.iter().map(|&i| &splits.unlabeled.samples[i]).collect();
        let global = (epoch * cfg.iterations_per_epoch + it) as u64;
        let m = train_step(&labeled, &unlabeled, state, cfg, aug, step_seed(cfg.seed, global))?;

        sums.l_x += m.losses.l_x;
        sums.l_u1 += m.losses.l_u1;
        sums.l_u2 += m.losses.l_u2;
        sums.l_s += m.losses.l_s;
        sums.total += m.losses.total;
        high += m.high_count;
        mid += m.mid_count;
        discard += m.discard_count;
        for (b, class) in m.pseudo_labels {
            admitted += 1;
            if splits.unlabeled_truth.label(unl_idx[b]) == Some(class) {
                correct += 1;
            }
        }
    }
    state.reg.end_epoch();
    state.epoch += 1;

    let iters = cfg.iterations_per_epoch as f64;
    let views = high + mid + discard;
    let val_acc = if splits.validation.is_empty() {
        None
    } else {
        Some(evaluate(state.eval_params(cfg), &splits.validation)?.accuracy)
    };
    Ok(EpochMetrics {
        epoch,
        loss_x: sums.l_x / iters,
        loss_u1: sums.l_u1 / iters,
        loss_u2: sums.l_u2 / iters,
        loss_s: sums.l_s / iters,
        loss_total: sums.total / iters,
        high_count: high,
        mid_count: mid,
        discard_count: discard,
        mined_ratio: if views == 0 { 0.0 } else { mid as f64 / views as f64 },
        pseudo_precision: if admitted == 0 { 0.0 } else { correct as f64 / admitted as f64 },
        val_acc,
        thresholds: state.reg.current().to_vec(),
    })
}

/// Runs the remaining epochs of `state`, reporting each one to `on_epoch`.
pub fn train(
    state: &mut TrainState,
    cfg: &TrainConfig,
    splits: &Splits,
    mut on_epoch: impl FnMut(&EpochMetrics, &TrainState) -> Result<()>,
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    let aug = run_augmenter(splits, cfg)?;
    let mut history = Vec::new();
    while state.epoch < cfg.epochs {
        let m = train_epoch(state, cfg, splits, &aug)?;
        on_epoch(&m, state)?;
        history.push(m);
    }
    Ok(history)
}

/// Fresh state plus a full run.
pub fn fit(arch: Architecture, cfg: &TrainConfig, splits: &Splits) -> Result<(TrainState, Vec<EpochMetrics>)> {
    let mut state = TrainState::new(arch, cfg)?;
    let history = train(&mut state, cfg, splits, |_, _| Ok(()))?;
    Ok((state, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// Accuracy within each class; 0 for classes with no samples.
    pub per_class: Vec<f64>,
    pub class_counts: Vec<usize>,
}

/// Argmax accuracy of `model` on `ds`.
pub fn evaluate(model: &impl Classifier, ds: &Dataset) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::param("cannot evaluate on an empty dataset"));
    }
    let c = ds.num_classes();
    let mut hits = vec![0usize; c];
    let mut counts = vec![0usize; c];
    for (s, &label) in ds.samples().iter().zip(ds.labels()) {
        counts[label] += 1;
        if model.predict(s)?.argmax() == label {
            hits[label] += 1;
        }
    }
    let total_hits: usize = hits.iter().sum();
    let per_class = hits
        .iter()
        .zip(&counts)
        .map(|(&h, &n)| if n == 0 { 0.0 } else { h as f64 / n as f64 })
        .collect();
    Ok(EvalReport {
        accuracy: total_hits as f64 / ds.len() as f64,
        per_class,
        class_counts: counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_blobs, split, SplitSpec};
    use crate::losses::{unsup_loss_high, unsup_loss_mid, UnlabeledRecord};

    fn tiny_splits(seed: u64) -> Splits {
        let ds = gen_blobs(3, 40, 2, 5.0, seed).unwrap();
        split(
            &ds,
            &SplitSpec {
                num_labeled: 9,
                num_validation: 30,
                per_class_balance: true,
                seed,
            },
        )
        .unwrap()
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            epochs: 2,
            iterations_per_epoch: 5,
            tau: 0.6,
            sim_threshold: 0.8,
            ..TrainConfig::default()
        }
    }

    struct Fixed(Vec<f64>);

    impl Classifier for Fixed {
        fn predict(&self, _: &Sample) -> Result<ProbVector> {
            ProbVector::new(self.0.clone())
        }
    }

    struct Oracle;

    impl Classifier for Oracle {
        fn predict(&self, s: &Sample) -> Result<ProbVector> {
            ProbVector::indicator(2, (s.features()[0] > 0.0) as usize)
        }
    }

    #[test]
    fn evaluate_perfect_and_empty() {
        let samples = vec![Sample::vector(0, vec![1.0]), Sample::vector(1, vec![-1.0])];
        let ds = Dataset::new(samples, vec![1, 0], 2).unwrap();
        let r = evaluate(&Oracle, &ds).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.per_class, vec![1.0, 1.0]);

        let empty = ds.subset(&[]);
        assert!(matches!(evaluate(&Oracle, &empty), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn per_class_accuracy_weights_back_to_overall() {
        let splits = tiny_splits(3);
        let r = evaluate(&Fixed(vec![0.2, 0.5, 0.3]), &splits.validation).unwrap();
        let weighted: f64 = r
            .per_class
            .iter()
            .zip(&r.class_counts)
            .map(|(a, &n)| a * n as f64)
            .sum::<f64>()
            / splits.validation.len() as f64;
        assert!((weighted - r.accuracy).abs() < 1e-12);
    }

    #[test]
    fn sampler_cycles_every_index() {
        let mut s = BatchSampler::new(5, 9).unwrap();
        let mut seen = s.next_batch(5);
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.next_batch(12).len(), 12);
        assert!(BatchSampler::new(0, 1).is_err());
    }

    #[test]
    fn validate_names_keys() {
        let cfg = TrainConfig { tau: 1.5, ..TrainConfig::default() };
        match cfg.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "trainer.tau"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = TrainConfig { k_strong: 0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn objective_matches_loss_functions() {
        let splits = tiny_splits(5);
        let cfg = tiny_cfg();
        let mut state = TrainState::new(Architecture::mlp(2, 3), &cfg).unwrap();
        let aug = run_augmenter(&splits, &cfg).unwrap();
        let labeled: Vec<(&Sample, usize)> =
            (0..4).map(|i| (&splits.labeled.samples[i], splits.labeled.labels[i])).collect();
        let unlabeled: Vec<&Sample> = splits.unlabeled.samples[..4].iter().collect();
        let plan = prepare_step(&labeled, &unlabeled, &mut state, &cfg, &aug, 11).unwrap();
        let (loss, _) = objective(&state.params, &plan).unwrap();

        let records: Vec<UnlabeledRecord> = plan
            .entries
            .iter()
            .map(|e| UnlabeledRecord {
                sample_id: e.batch_index as u64,
                q_bar: e.q_bar.clone(),
                q_hat: e.q_hat.clone(),
                strong_preds: vec![state.params.forward_cached(&e.input).unwrap().probs],
            })
            .collect();
        let high = unsup_loss_high(&records, cfg.tau).unwrap();
        let mid = unsup_loss_mid(&records, cfg.tau, &state.reg, 3).unwrap();
        assert!((loss.l_u1 - high).abs() < 1e-12);
        assert!((loss.l_u2 - mid).abs() < 1e-12);
    }

    #[test]
    fn epoch_counts_partition_and_bound() {
        let splits = tiny_splits(7);
        let cfg = tiny_cfg();
        let (_, history) = fit(Architecture::mlp(2, 3), &cfg, &splits).unwrap();
        assert_eq!(history.len(), 2);
        for m in &history {
            assert_eq!(m.high_count + m.mid_count + m.discard_count, 5 * 4);
            assert!(m.thresholds.iter().all(|&t| t <= 0.95));
            assert!((0.0..=1.0).contains(&m.mined_ratio));
            assert!((0.0..=1.0).contains(&m.pseudo_precision));
        }
    }

    #[test]
    fn adaptive_off_mines_nothing() {
        let splits = tiny_splits(8);
        let cfg = TrainConfig { use_adaptive_threshold: false, ..tiny_cfg() };
        let (_, history) = fit(Architecture::mlp(2, 3), &cfg, &splits).unwrap();
        assert!(history.iter().all(|m| m.mid_count == 0 && m.loss_u2 == 0.0));
    }

    #[test]
    fn cross_epoch_memory_is_keyed_by_id() {
        let splits = tiny_splits(9);
        let cfg = TrainConfig {
            q_bar_mode: QBarMode::CrossEpochEma { decay: 0.999 },
            ..tiny_cfg()
        };
        let (state, _) = fit(Architecture::mlp(2, 3), &cfg, &splits).unwrap();
        assert!(!state.q_bar_memory.is_empty());
        assert!(state.q_bar_memory.len() <= splits.unlabeled.samples.len());
    }
}
