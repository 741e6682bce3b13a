//! Weak and strong stochastic augmentation.
//!
//! Images: weak = horizontal flip (p = 0.5) followed by an integer
//! translation of up to 12.5% per axis with reflection padding. Strong =
//! `strong_ops_per_sample` transforms drawn with replacement from a fixed
//! nine-entry catalog, each scaled by `magnitude`.
//!
//! Vectors: weak = Gaussian noise (σ = 0.05) clipped to the observed feature
//! range; strong = Gaussian noise (σ = 0.2), clipped, then each coordinate
//! zeroed with probability 0.1.
//!
//! Every function here is a pure function of `(sample, seed, settings)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEAK_TRANSLATE_FRACTION: f64 = 0.125;
pub const WEAK_NOISE_STD: f64 = 0.05;
pub const STRONG_NOISE_STD: f64 = 0.2;
pub const STRONG_DROP_PROB: f64 = 0.1;
pub const DEFAULT_STRONG_OPS: usize = 2;
pub const DEFAULT_MAGNITUDE: f64 = 0.5;

/// Channel-last image with pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::param("image dimensions must be positive"));
        }
        Error::check_dim(height * width * channels, pixels.len())?;
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::param("pixel values must lie in [0, 1]"));
        }
        Ok(Image { height, width, channels, pixels })
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    fn map_pixels(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            pixels: self.pixels.iter().map(|&p| f(p).clamp(0.0, 1.0)).collect(),
            ..self.clone()
        }
    }

    /// Resamples by nearest neighbour: output `(y, x)` reads the source at
    /// `src(y, x)`, reflected back into the frame.
    fn remap(&self, src: impl Fn(f64, f64) -> (f64, f64)) -> Image {
        let mut out = vec![0.0; self.pixels.len()];
        for y in 0..self.height {
            for x in 0..self.width {
                let (sy, sx) = src(y as f64, x as f64);
                let sy = reflect(sy.round() as i64, self.height);
                let sx = reflect(sx.round() as i64, self.width);
                for c in 0..self.channels {
                    out[(y * self.width + x) * self.channels + c] = self.at(sy, sx, c);
                }
            }
        }
        Image { pixels: out, ..self.clone() }
    }
}

/// Mirror reflection without edge repetition (`… c b | a b c … | b a …`).
fn reflect(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    (if m < n as i64 { m } else { period - m }) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SampleData {
    Image(Image),
    Vector(Vec<f64>),
}

/// One input with a stable identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub data: SampleData,
}

impl Sample {
    pub fn vector(id: u64, values: Vec<f64>) -> Self {
        Sample { id, data: SampleData::Vector(values) }
    }

    pub fn image(id: u64, image: Image) -> Self {
        Sample { id, data: SampleData::Image(image) }
    }

    /// Flat feature view (HWC order for images).
    pub fn features(&self) -> &[f64] {
        match &self.data {
            SampleData::Image(img) => &img.pixels,
            SampleData::Vector(v) => v,
        }
    }

    pub fn dim(&self) -> usize {
        self.features().len()
    }
}

/// Per-dimension bounds used to clip vector augmentations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureRange {
    /// Observed range over a set of vector samples; `None` when the set is
    /// empty or holds images.
    pub fn observe<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Option<Self> {
        let mut range: Option<FeatureRange> = None;
        for s in samples {
            let SampleData::Vector(v) = &s.data else {
                return None;
            };
            match &mut range {
                None => range = Some(FeatureRange { min: v.clone(), max: v.clone() }),
                Some(r) => {
                    if r.min.len() != v.len() {
                        return None;
                    }
                    for (i, &x) in v.iter().enumerate() {
                        r.min[i] = r.min[i].min(x);
                        r.max[i] = r.max[i].max(x);
                    }
                }
            }
        }
        range
    }

    fn clip(&self, v: &mut [f64]) {
        for ((x, lo), hi) in v.iter_mut().zip(&self.min).zip(&self.max) {
            *x = x.clamp(*lo, *hi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AugmentMode {
    Weak,
    Strong,
}

/// A single augmentation request. Weak mode ignores the strong settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    pub mode: AugmentMode,
    pub rng_seed: u64,
    pub strong_ops_per_sample: usize,
    pub magnitude: f64,
}

/// The strong-augmentation catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrongOp {
    Invert,
    Contrast,
    Brightness,
    ShearX,
    ShearY,
    Translate,
    Rotate,
    Posterize,
    Solarize,
}

impl StrongOp {
    pub const CATALOG: [StrongOp; 9] = [
        StrongOp::Invert,
        StrongOp::Contrast,
        StrongOp::Brightness,
        StrongOp::ShearX,
        StrongOp::ShearY,
        StrongOp::Translate,
        StrongOp::Rotate,
        StrongOp::Posterize,
        StrongOp::Solarize,
    ];

    /// Applies the op at `magnitude ∈ [0, 1]`; `rng` supplies signs and axes.
    pub fn apply(self, img: &Image, magnitude: f64, rng: &mut impl Rng) -> Image {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let cy = (img.height as f64 - 1.0) / 2.0;
        let cx = (img.width as f64 - 1.0) / 2.0;
        match self {
            StrongOp::Invert => img.map_pixels(|p| 1.0 - p),
            StrongOp::Contrast => {
                let mean = img.pixels.iter().sum::<f64>() / img.pixels.len() as f64;
                let factor = 1.0 + sign * 0.9 * magnitude;
                img.map_pixels(|p| mean + factor * (p - mean))
            }
            StrongOp::Brightness => {
                let shift = sign * 0.5 * magnitude;
                img.map_pixels(|p| p + shift)
            }
            StrongOp::ShearX => {
                let s = sign * 0.3 * magnitude;
                img.remap(|y, x| (y, x + s * (y - cy)))
            }
            StrongOp::ShearY => {
                let s = sign * 0.3 * magnitude;
                img.remap(|y, x| (y + s * (x - cx), x))
            }
            StrongOp::Translate => {
                let horizontal = rng.random_bool(0.5);
                let extent = if horizontal { img.width } else { img.height } as f64;
                let shift = (sign * 0.3 * magnitude * extent).round();
                if horizontal {
                    img.remap(|y, x| (y, x - shift))
                } else {
                    img.remap(|y, x| (y - shift, x))
                }
            }
            StrongOp::Rotate => {
                let theta = (sign * 30.0 * magnitude).to_radians();
                let (sin, cos) = theta.sin_cos();
                img.remap(|y, x| {
                    let (dy, dx) = (y - cy, x - cx);
                    (cy + sin * dx + cos * dy, cx + cos * dx - sin * dy)
                })
            }
            StrongOp::Posterize => {
                let bits = 8 - (4.0 * magnitude).round() as i32;
                let levels = f64::from((1u32 << bits) - 1);
                img.map_pixels(|p| (p * levels).round() / levels)
            }
            StrongOp::Solarize => {
                let threshold = 1.0 - magnitude;
                img.map_pixels(|p| if p > threshold { 1.0 - p } else { p })
            }
        }
    }
}

/// Augmentation settings shared by every view in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Augmenter {
    pub strong_ops_per_sample: usize,
    pub magnitude: f64,
    /// Clipping bounds for vector samples.
    pub range: Option<FeatureRange>,
}

impl Default for Augmenter {
    fn default() -> Self {
        Augmenter {
            strong_ops_per_sample: DEFAULT_STRONG_OPS,
            magnitude: DEFAULT_MAGNITUDE,
            range: None,
        }
    }
}

impl Augmenter {
    pub fn new(strong_ops_per_sample: usize, magnitude: f64, range: Option<FeatureRange>) -> Result<Self> {
        if !(0.0..=1.0).contains(&magnitude) {
            return Err(Error::param(format!("magnitude must lie in [0, 1], got {magnitude}")));
        }
        Ok(Augmenter { strong_ops_per_sample, magnitude, range })
    }

    pub fn apply(&self, sample: &Sample, policy: &AugmentPolicy) -> Sample {
        match policy.mode {
            AugmentMode::Weak => self.weak(sample, policy.rng_seed),
            AugmentMode::Strong => Augmenter {
                strong_ops_per_sample: policy.strong_ops_per_sample,
                magnitude: policy.magnitude.clamp(0.0, 1.0),
                range: self.range.clone(),
            }
            .strong(sample, policy.rng_seed),
        }
    }

    pub fn weak(&self, sample: &Sample, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = match &sample.data {
            SampleData::Image(img) => {
                let (flip, dx, dy) = draw_weak(img, &mut rng);
                SampleData::Image(weak_image(img, flip, dx, dy))
            }
            SampleData::Vector(v) => {
                let noise = Normal::new(0.0, WEAK_NOISE_STD).expect("valid std");
                let mut out: Vec<f64> = v.iter().map(|x| x + noise.sample(&mut rng)).collect();
                if let Some(r) = &self.range {
                    r.clip(&mut out);
                }
                SampleData::Vector(out)
            }
        };
        Sample { id: sample.id, data }
    }

    pub fn strong(&self, sample: &Sample, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = match &sample.data {
            SampleData::Image(img) => {
                let mut out = img.clone();
                for _ in 0..self.strong_ops_per_sample {
                    let op = StrongOp::CATALOG[rng.random_range(0..StrongOp::CATALOG.len())];
                    out = op.apply(&out, self.magnitude, &mut rng);
                }
                SampleData::Image(out)
            }
            SampleData::Vector(v) => {
                let noise = Normal::new(0.0, STRONG_NOISE_STD).expect("valid std");
                let mut out: Vec<f64> = v.iter().map(|x| x + noise.sample(&mut rng)).collect();
                if let Some(r) = &self.range {
                    r.clip(&mut out);
                }
                for x in out.iter_mut() {
                    if rng.random_bool(STRONG_DROP_PROB) {
                        *x = 0.0;
                    }
                }
                SampleData::Vector(out)
            }
        };
        Sample { id: sample.id, data }
    }
}

/// Flip decision and integer offsets `(dx, dy)` of one weak image view.
fn draw_weak(img: &Image, rng: &mut impl Rng) -> (bool, i64, i64) {
    let flip = rng.random_bool(0.5);
    let max_dx = (WEAK_TRANSLATE_FRACTION * img.width as f64).round() as i64;
    let max_dy = (WEAK_TRANSLATE_FRACTION * img.height as f64).round() as i64;
    let dx = rng.random_range(-max_dx..=max_dx);
    let dy = rng.random_range(-max_dy..=max_dy);
    (flip, dx, dy)
}

/// Horizontal flip then an integer translation by `(dx, dy)`.
pub fn weak_image(img: &Image, flip: bool, dx: i64, dy: i64) -> Image {
    let w = img.width as f64;
    img.remap(|y, x| {
        let x = x - dx as f64;
        let x = if flip { w - 1.0 - x } else { x };
        (y - dy as f64, x)
    })
}

/// Seed for one view of one sample: a SplitMix64 hash of the three inputs.
pub fn view_seed(base_seed: u64, sample_id: u64, view_index: u64) -> u64 {
    let mut h = splitmix64(base_seed);
    h = splitmix64(h ^ sample_id);
    splitmix64(h ^ view_index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
