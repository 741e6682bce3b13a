//! A small softmax classifier with hand-written forward and backward passes.
//!
//! Parameters live in one flat buffer so the optimizer, the EMA shadow,
//! checkpoints and finite-difference checks all treat them uniformly. The
//! layout is: optional conv front-end (`filters × k × k × channels` weights,
//! then `filters` biases), followed by each dense layer's row-major
//! `out × in` weight matrix and its `out` biases.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::Sample;
use crate::error::{Error, Result};
use crate::prob::{ema_update_in_place, ProbVector};

pub const DEFAULT_LR: f64 = 0.03;
pub const DEFAULT_WEIGHT_DECAY: f64 = 0.0005;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_EMA_DECAY: f64 = 0.999;

/// Fraction of a half-period covered by the cosine schedule: the rate ends
/// at `base_lr · cos(7π/16)`.
pub const COSINE_SPAN: f64 = 7.0 * PI / 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputShape {
    Vector { dim: usize },
    Image { height: usize, width: usize, channels: usize },
}

impl InputShape {
    pub fn dim(&self) -> usize {
        match *self {
            InputShape::Vector { dim } => dim,
            InputShape::Image { height, width, channels } => height * width * channels,
        }
    }
}

/// Same-padded, stride-1 convolution followed by ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
}

impl Default for ConvSpec {
    fn default() -> Self {
        ConvSpec { filters: 8, kernel: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: InputShape,
    pub conv: Option<ConvSpec>,
    pub hidden: Vec<usize>,
    pub num_classes: usize,
}

impl Architecture {
    /// `dim → 64 → 64 → C` with ReLU.
    pub fn mlp(dim: usize, num_classes: usize) -> Self {
        Architecture {
            input: InputShape::Vector { dim },
            conv: None,
            hidden: vec![64, 64],
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::param("model needs at least 2 output classes"));
        }
        if self.input.dim() == 0 || self.hidden.contains(&0) {
            return Err(Error::param("layer widths must be positive"));
        }
        if let Some(conv) = self.conv {
            if !matches!(self.input, InputShape::Image { .. }) {
                return Err(Error::param("conv front-end requires image input"));
            }
            if conv.filters == 0 || conv.kernel % 2 == 0 {
                return Err(Error::param("conv needs >0 filters and an odd kernel"));
            }
        }
        Ok(())
    }

    fn conv_geometry(&self) -> Option<ConvGeometry> {
        let spec = self.conv?;
        let InputShape::Image { height, width, channels } = self.input else {
            return None;
        };
        Some(ConvGeometry { height, width, channels, filters: spec.filters, kernel: spec.kernel })
    }

    /// Widths of the dense stack, input first.
    fn dense_widths(&self) -> Vec<usize> {
        let first = match self.conv_geometry() {
            Some(g) => g.height * g.width * g.filters,
            None => self.input.dim(),
        };
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(first);
        w.extend(&self.hidden);
        w.push(self.num_classes);
        w
    }

    pub fn num_params(&self) -> usize {
        let conv = self.conv_geometry().map_or(0, |g| g.weight_len() + g.filters);
        let dense: usize = self.dense_widths().windows(2).map(|p| p[0] * p[1] + p[1]).sum();
        conv + dense
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvGeometry {
    height: usize,
    width: usize,
    channels: usize,
    filters: usize,
    kernel: usize,
}

impl ConvGeometry {
    fn weight_len(&self) -> usize {
        self.filters * self.kernel * self.kernel * self.channels
    }

    #[inline]
    fn weight_index(&self, f: usize, ky: usize, kx: usize, c: usize) -> usize {
        ((f * self.kernel + ky) * self.kernel + kx) * self.channels + c
    }

    /// Calls `visit(out_index, in_index, weight_index)` for every live tap.
    fn for_each_tap(&self, mut visit: impl FnMut(usize, usize, usize)) {
        let pad = (self.kernel / 2) as isize;
        for y in 0..self.height {
            for x in 0..self.width {
                for f in 0..self.filters {
                    let out = (y * self.width + x) * self.filters + f;
                    for ky in 0..self.kernel {
                        let sy = y as isize + ky as isize - pad;
                        if sy < 0 || sy >= self.height as isize {
                            continue;
                        }
                        for kx in 0..self.kernel {
                            let sx = x as isize + kx as isize - pad;
                            if sx < 0 || sx >= self.width as isize {
                                continue;
                            }
                            let base = (sy as usize * self.width + sx as usize) * self.channels;
                            for c in 0..self.channels {
                                visit(out, base + c, self.weight_index(f, ky, kx, c));
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Trainable parameters plus the architecture that gives them meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    arch: Architecture,
    values: Vec<f64>,
}

/// Gradient buffer with the same layout as [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<f64>);

impl Gradients {
    pub fn zeros(len: usize) -> Self {
        Gradients(vec![0.0; len])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    /// Conv output after ReLU.
    conv_out: Option<Vec<f64>>,
    /// Input to each dense layer.
    layer_inputs: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: ProbVector,
}

impl ModelParams {
    /// He-uniform initialization (bound `√(6 / fan_in)`), zero biases.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Vec::with_capacity(arch.num_params());
        if let Some(g) = arch.conv_geometry() {
            let bound = (6.0 / (g.kernel * g.kernel * g.channels) as f64).sqrt();
            values.extend((0..g.weight_len()).map(|_| rng.random_range(-bound..bound)));
            values.extend(std::iter::repeat_n(0.0, g.filters));
        }
        for pair in arch.dense_widths().windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            values.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        debug_assert_eq!(values.len(), arch.num_params());
        Ok(ModelParams { arch, values })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let n = arch.num_params();
        Ok(ModelParams { arch, values: vec![0.0; n] })
    }

    pub fn from_values(arch: Architecture, values: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        Error::check_dim(arch.num_params(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        Ok(ModelParams { arch, values })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    pub fn forward(&self, input: &Sample) -> Result<ProbVector> {
        Ok(self.forward_cached(input.features())?.probs)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<ForwardCache> {
        Error::check_dim(self.arch.input.dim(), input.len())?;
        let mut offset = 0;
        let mut conv_out = None;
        let mut act = input.to_vec();
        if let Some(g) = self.arch.conv_geometry() {
            let w = &self.values[..g.weight_len()];
            let b = &self.values[g.weight_len()..g.weight_len() + g.filters];
            let mut out = vec![0.0; g.height * g.width * g.filters];
            for (i, o) in out.iter_mut().enumerate() {
                *o = b[i % g.filters];
            }
            g.for_each_tap(|o, i, k| out[o] += w[k] * input[i]);
            out.iter_mut().for_each(|v| *v = v.max(0.0));
            offset = g.weight_len() + g.filters;
            act = out.clone();
            conv_out = Some(out);
        }
        let widths = self.arch.dense_widths();
        let layers = widths.len() - 1;
        let mut layer_inputs = Vec::with_capacity(layers);
        for l in 0..layers {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            let w = &self.values[offset..offset + n_in * n_out];
            let b = &self.values[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let mut z: Vec<f64> = b.to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *zo += row.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>();
            }
            if l + 1 < layers {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            layer_inputs.push(std::mem::replace(&mut act, z));
        }
        let probs = ProbVector::softmax(&act)?;
        Ok(ForwardCache {
            input: input.to_vec(),
            conv_out,
            layer_inputs,
            logits: act,
            probs,
        })
    }

    /// Parameter gradients given `∂L/∂logits` for one forward pass.
    pub fn backward(&self, cache: &ForwardCache, grad_logits: &[f64]) -> Result<Gradients> {
        let mut grads = Gradients::zeros(self.values.len());
        self.accumulate_backward(cache, grad_logits, &mut grads)?;
        Ok(grads)
    }

    /// Adds this pass's parameter gradients into `grads`.
    pub fn accumulate_backward(
        &self,
        cache: &ForwardCache,
        grad_logits: &[f64],
        grads: &mut Gradients,
    ) -> Result<()> {
        Error::check_dim(self.arch.num_classes, grad_logits.len())?;
        Error::check_dim(self.values.len(), grads.0.len())?;
        let widths = self.arch.dense_widths();
        let layers = widths.len() - 1;
        let conv_len = self.arch.conv_geometry().map_or(0, |g| g.weight_len() + g.filters);

        let mut offsets = Vec::with_capacity(layers);
        let mut off = conv_len;
        for l in 0..layers {
            offsets.push(off);
            off += widths[l] * widths[l + 1] + widths[l + 1];
        }

        let mut delta = grad_logits.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            let a_in = &cache.layer_inputs[l];
            let base = offsets[l];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut grads.0[base + o * n_in..base + (o + 1) * n_in];
                    row.iter_mut().zip(a_in).for_each(|(g, a)| *g += d * a);
                }
                grads.0[base + n_in * n_out + o] += d;
            }
            let needs_input_grad = l > 0 || conv_len > 0;
            if !needs_input_grad {
                break;
            }
            let w = &self.values[base..base + n_in * n_out];
            let mut prev = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    prev.iter_mut().zip(row).for_each(|(p, wv)| *p += d * wv);
                }
            }
            // ReLU mask: every dense input except the raw features went through one
            for (p, a) in prev.iter_mut().zip(a_in) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }

        if let (Some(g), Some(_)) = (self.arch.conv_geometry(), &cache.conv_out) {
            let input = &cache.input;
            let (gw, rest) = grads.0.split_at_mut(g.weight_len());
            let gb = &mut rest[..g.filters];
            for (o, &d) in delta.iter().enumerate() {
                gb[o % g.filters] += d;
            }
            g.for_each_tap(|o, i, k| gw[k] += delta[o] * input[i]);
        }
        Ok(())
    }
}

/// Anything that maps a sample to a class distribution.
pub trait Classifier {
    fn predict(&self, sample: &Sample) -> Result<ProbVector>;
}

impl Classifier for ModelParams {
    fn predict(&self, sample: &Sample) -> Result<ProbVector> {
        self.forward(sample)
    }
}

/// Momentum SGD state with cosine decay and a weight-EMA shadow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub base_lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub step_count: u64,
    pub total_steps: u64,
    pub ema_decay: f64,
    pub ema_params: ModelParams,
    velocity: Vec<f64>,
}

/// Scalar optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub base_lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub ema_decay: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            base_lr: DEFAULT_LR,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            momentum: DEFAULT_MOMENTUM,
            ema_decay: DEFAULT_EMA_DECAY,
        }
    }
}

impl OptimState {
    /// Fresh state whose EMA shadow starts equal to `params`.
    pub fn new(params: &ModelParams, cfg: OptimConfig, total_steps: u64) -> Result<Self> {
        if total_steps == 0 {
            return Err(Error::param("total_steps must be positive"));
        }
        if !(0.0..1.0).contains(&cfg.ema_decay) || !(0.0..1.0).contains(&cfg.momentum) {
            return Err(Error::param("ema_decay and momentum must lie in [0, 1)"));
        }
        if !(cfg.base_lr.is_finite() && cfg.base_lr > 0.0)
            || !(cfg.weight_decay.is_finite() && cfg.weight_decay >= 0.0)
        {
            return Err(Error::param("base_lr must be > 0 and weight_decay >= 0"));
        }
        Ok(OptimState {
            base_lr: cfg.base_lr,
            weight_decay: cfg.weight_decay,
            momentum: cfg.momentum,
            step_count: 0,
            total_steps,
            ema_decay: cfg.ema_decay,
            ema_params: params.clone(),
            velocity: vec![0.0; params.values.len()],
        })
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// Restores a state from its parts (checkpoint loading).
    pub fn from_parts(
        cfg: OptimConfig,
        step_count: u64,
        total_steps: u64,
        ema_params: ModelParams,
        velocity: Vec<f64>,
    ) -> Result<Self> {
        let mut s = OptimState::new(&ema_params, cfg, total_steps)?;
        if step_count > total_steps {
            return Err(Error::format("step_count", "exceeds total_steps"));
        }
        Error::check_dim(ema_params.values.len(), velocity.len())?;
        s.step_count = step_count;
        s.velocity = velocity;
        Ok(s)
    }

    pub fn config(&self) -> OptimConfig {
        OptimConfig {
            base_lr: self.base_lr,
            weight_decay: self.weight_decay,
            momentum: self.momentum,
            ema_decay: self.ema_decay,
        }
    }
}

/// `base_lr · cos(7π · step / (16 · total))`.
pub fn cosine_lr(opt: &OptimState) -> f64 {
    opt.base_lr * (COSINE_SPAN * opt.step_count as f64 / opt.total_steps as f64).cos()
}

/// One momentum-SGD update with decoupled weight decay, then the EMA update.
///
/// Leaves everything untouched when a gradient is non-finite.
pub fn sgd_step(params: &mut ModelParams, grads: &Gradients, opt: &mut OptimState) -> Result<()> {
    Error::check_dim(params.values.len(), grads.0.len())?;
    Error::check_dim(params.values.len(), opt.velocity.len())?;
    if !grads.is_finite() {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    if opt.step_count >= opt.total_steps {
        return Err(Error::param(format!(
            "learning-rate schedule exhausted after {} steps",
            opt.total_steps
        )));
    }
    let lr = cosine_lr(opt);
    let shrink = 1.0 - lr * opt.weight_decay;
    for ((w, v), g) in params.values.iter_mut().zip(&mut opt.velocity).zip(&grads.0) {
        *v = opt.momentum * *v + g;
        *w = *w * shrink - lr * *v;
    }
    opt.step_count += 1;
    ema_update_in_place(&mut opt.ema_params.values, &params.values, opt.ema_decay)
}

/// Forward pass through the EMA weights.
pub fn predict_ema(opt: &OptimState, input: &Sample) -> Result<ProbVector> {
    opt.ema_params.forward(input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::Image;
    use crate::losses::{ce_logit_grad, cross_entropy};

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn zero_params_give_uniform_output() {
        let p = ModelParams::zeros(Architecture::mlp(3, 4)).unwrap();
        let out = p.forward(&Sample::vector(0, vec![1.0, -2.0, 0.5])).unwrap();
        assert!(out.as_slice().iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn forward_checks_dimension() {
        let p = ModelParams::init(Architecture::mlp(3, 2), 1).unwrap();
        assert!(matches!(
            p.forward(&Sample::vector(0, vec![1.0])),
            Err(Error::Dimension { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn linear_model_sign_analysis() {
        // logits = [x, -x]: positive input favours class 0
        let arch = Architecture {
            input: InputShape::Vector { dim: 1 },
            conv: None,
            hidden: vec![],
            num_classes: 2,
        };
        let p = ModelParams::from_values(arch, vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.forward(&Sample::vector(0, vec![2.0])).unwrap().argmax(), 0);
        assert_eq!(p.forward(&Sample::vector(0, vec![-2.0])).unwrap().argmax(), 1);
    }

    #[test]
    fn zero_output_gradient_gives_zero_param_gradient() {
        let p = ModelParams::init(Architecture::mlp(3, 3), 2).unwrap();
        let cache = p.forward_cached(&[0.1, 0.2, 0.3]).unwrap();
        let g = p.backward(&cache, &[0.0; 3]).unwrap();
        assert!(g.0.iter().all(|v| *v == 0.0));
    }

    fn check_param_gradients(arch: Architecture, input: Vec<f64>, seed: u64) {
        let mut params = ModelParams::init(arch, seed).unwrap();
        // non-zero biases so no ReLU sits exactly on its kink
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        params.values_mut().iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
        let c = params.num_classes();
        let target = ProbVector::indicator(c, 1).unwrap();
        let cache = params.forward_cached(&input).unwrap();
        let analytic = params.backward(&cache, &ce_logit_grad(&target, &cache.probs)).unwrap();
        let loss = |p: &ModelParams| {
            cross_entropy(&target, &p.forward_cached(&input).unwrap().probs).unwrap()
        };
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..params.values().len() {
            let mut plus = params.clone();
            plus.values_mut()[i] += h;
            let mut minus = params.clone();
            minus.values_mut()[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            worst = worst.max(rel_err(analytic.0[i], fd));
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let arch = Architecture {
            input: InputShape::Vector { dim: 4 },
            conv: None,
            hidden: vec![6, 5],
            num_classes: 3,
        };
        check_param_gradients(arch, vec![0.3, -0.7, 1.1, 0.2], 7);
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let arch = Architecture {
            input: InputShape::Image { height: 4, width: 5, channels: 2 },
            conv: Some(ConvSpec { filters: 3, kernel: 3 }),
            hidden: vec![6],
            num_classes: 3,
        };
        let input: Vec<f64> = (0..40).map(|i| ((i * 37) % 17) as f64 / 17.0).collect();
        check_param_gradients(arch, input, 3);
    }

    #[test]
    fn conv_model_runs_on_images() {
        let arch = Architecture {
            input: InputShape::Image { height: 6, width: 6, channels: 1 },
            conv: Some(ConvSpec::default()),
            hidden: vec![16],
            num_classes: 2,
        };
        let p = ModelParams::init(arch, 0).unwrap();
        let img = Image::new(6, 6, 1, vec![0.5; 36]).unwrap();
        let out = p.forward(&Sample::image(0, img)).unwrap();
        assert!((out.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_ce_gradient_is_pred_minus_target() {
        let params = ModelParams::init(Architecture::mlp(2, 3), 5).unwrap();
        let input = [0.4, -0.9];
        let target = ProbVector::indicator(3, 2).unwrap();
        let cache = params.forward_cached(&input).unwrap();
        let g = ce_logit_grad(&target, &cache.probs);
        let h = 1e-5;
        for i in 0..3 {
            let mut zp = cache.logits.clone();
            let mut zm = cache.logits.clone();
            zp[i] += h;
            zm[i] -= h;
            let fd = (cross_entropy(&target, &ProbVector::softmax(&zp).unwrap()).unwrap()
                - cross_entropy(&target, &ProbVector::softmax(&zm).unwrap()).unwrap())
                / (2.0 * h);
            assert!(rel_err(g[i], fd) < 1e-6);
            assert_eq!(g[i], cache.probs.as_slice()[i] - target.as_slice()[i]);
        }
    }

    fn scalar_model(w: f64) -> ModelParams {
        let arch = Architecture {
            input: InputShape::Vector { dim: 1 },
            conv: None,
            hidden: vec![],
            num_classes: 2,
        };
        // one live weight; the rest stay zero
        ModelParams::from_values(arch, vec![w, 0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let p = scalar_model(1.0);
        let mut opt = OptimState::new(&p, OptimConfig::default(), 1000).unwrap();
        assert!((cosine_lr(&opt) - 0.03).abs() < 1e-12);
        opt.step_count = 1000;
        assert!((cosine_lr(&opt) - 0.0058528).abs() < 1e-7);
        opt.step_count = 500;
        assert!((cosine_lr(&opt) - 0.023190314).abs() < 1e-8);
    }

    #[test]
    fn sgd_step_arithmetic() {
        let mut p = scalar_model(1.0);
        let cfg = OptimConfig { base_lr: 0.1, weight_decay: 0.0, momentum: 0.0, ema_decay: 0.999 };
        let mut opt = OptimState::new(&p, cfg, 10).unwrap();
        sgd_step(&mut p, &Gradients(vec![1.0, 0.0, 0.0, 0.0]), &mut opt).unwrap();
        assert!((p.values()[0] - 0.9).abs() < 1e-15);
        assert_eq!(opt.step_count, 1);
        assert!((opt.ema_params.values()[0] - (0.999 + 0.001 * 0.9)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_params_and_ema() {
        let mut p = ModelParams::init(Architecture::mlp(2, 2), 1).unwrap();
        let before = p.clone();
        let cfg = OptimConfig { weight_decay: 0.0, ..OptimConfig::default() };
        let mut opt = OptimState::new(&p, cfg, 10).unwrap();
        sgd_step(&mut p, &Gradients::zeros(before.values().len()), &mut opt).unwrap();
        assert_eq!(p, before);
        for (e, b) in opt.ema_params.values().iter().zip(before.values()) {
            assert!((e - b).abs() < 1e-15);
        }
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn non_finite_gradient_is_rejected_without_update() {
        let mut p = scalar_model(1.0);
        let mut opt = OptimState::new(&p, OptimConfig::default(), 10).unwrap();
        let err = sgd_step(&mut p, &Gradients(vec![f64::NAN, 0.0, 0.0, 0.0]), &mut opt);
        assert!(matches!(err, Err(Error::Numerical(_))));
        assert_eq!(p, scalar_model(1.0));
        assert_eq!(opt.step_count, 0);
    }

    #[test]
    fn ema_prediction_starts_equal_to_live() {
        let p = ModelParams::init(Architecture::mlp(2, 3), 9).unwrap();
        let opt = OptimState::new(&p, OptimConfig::default(), 5).unwrap();
        let s = Sample::vector(0, vec![0.2, 0.8]);
        assert_eq!(predict_ema(&opt, &s).unwrap(), p.forward(&s).unwrap());
    }

    #[test]
    fn schedule_exhaustion_is_an_error() {
        let mut p = scalar_model(1.0);
        let mut opt = OptimState::new(&p, OptimConfig::default(), 1).unwrap();
        let g = Gradients::zeros(4);
        sgd_step(&mut p, &g, &mut opt).unwrap();
        assert!(sgd_step(&mut p, &g, &mut opt).is_err());
    }
}
