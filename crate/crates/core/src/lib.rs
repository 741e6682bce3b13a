//! Semi-supervised classification with adaptive dual-threshold
//! pseudo-labeling.
//!
//! Unlabeled samples are scored on several weak views; the averaged
//! prediction `q̄` is sharpened into `q̂` and routed by two thresholds. A
//! fixed global cutoff `τ` admits confident samples for one-hot
//! cross-entropy training against their strong views. Per-class adaptive
//! thresholds `T_c`, tracked from the model's confidence on correctly
//! classified labeled data, additionally admit mid-confidence samples for a
//! soft squared-L2 consistency loss. A similarity loss spreads confident
//! pseudo labels to the strong views of other unlabeled samples whose
//! predictions overlap (Bhattacharyya coefficient above `T_s`).
//!
//! Modules, roughly bottom-up:
//!
//! - [`prob`]: categorical distributions and their pure operations.
//! - [`threshold`]: the per-class adaptive threshold registry.
//! - [`losses`]: the gate and the four loss terms.
//! - [`augment`]: weak and strong augmentation for images and vectors.
//! - [`model`]: a small MLP/conv classifier, SGD, cosine decay, weight EMA.
//! - [`data`]: synthetic generators, IDX/CSV loading, splitting.
//! - [`trainer`]: one training step, epochs, evaluation, metrics.
//! - [`config`], [`checkpoint`], [`cli`]: run configuration, persistence and
//!   the `train`/`eval`/`ablate` commands.

pub mod augment;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod losses;
pub mod model;
pub mod prob;
pub mod threshold;
pub mod trainer;

pub use augment::{Augmenter, Image, Sample, SampleData};
pub use data::{Dataset, SplitSpec, Splits};
pub use error::{Error, Result};
pub use losses::{GateDecision, LossBreakdown, LossWeights, Route, UnlabeledRecord};
pub use model::{Architecture, ModelParams, OptimConfig, OptimState};
pub use prob::ProbVector;
pub use threshold::ThresholdRegistry;
