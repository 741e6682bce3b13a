//! Per-class adaptive confidence thresholds.
//!
//! Each class `c` carries a live threshold `T_c` and an epoch-local scratch
//! value `T_c⁰`. During an epoch every correctly classified labeled sample
//! lowers both toward its max-probability (running minima). At the end of
//! the epoch a scratch value larger than the live one replaces it, which is
//! how thresholds recover once the model improves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::ProbVector;

/// Initial value of every threshold, and the ceiling they never exceed.
pub const INITIAL_THRESHOLD: f64 = 0.95;

/// One serialized row of a registry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub class_index: usize,
    pub t_current: f64,
    pub t_scratch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRegistry {
    current: Vec<f64>,
    scratch: Vec<f64>,
}

impl ThresholdRegistry {
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::param(format!(
                "registry needs at least 2 classes, got {num_classes}"
            )));
        }
        Ok(ThresholdRegistry {
            current: vec![INITIAL_THRESHOLD; num_classes],
            scratch: vec![INITIAL_THRESHOLD; num_classes],
        })
    }

    pub fn num_classes(&self) -> usize {
        self.current.len()
    }

    /// Resets every scratch threshold to the initial value.
    pub fn begin_epoch(&mut self) {
        self.scratch.fill(INITIAL_THRESHOLD);
    }

    /// Feeds one labeled prediction (raw weak-view model output).
    ///
    /// Misclassified samples leave the registry untouched.
    pub fn observe_labeled(&mut self, true_class: usize, prediction: &ProbVector) -> Result<()> {
        self.check_class(true_class)?;
        Error::check_dim(self.num_classes(), prediction.len())?;
        if prediction.argmax() != true_class {
            return Ok(());
        }
        let confidence = prediction.max();
        if confidence < self.current[true_class] {
            self.current[true_class] = confidence;
        }
        if confidence < self.scratch[true_class] {
            self.scratch[true_class] = confidence;
        }
        Ok(())
    }

    /// Promotes each scratch threshold that ended the epoch above its live one.
    pub fn end_epoch(&mut self) {
        for (cur, &scr) in self.current.iter_mut().zip(&self.scratch) {
            if scr > *cur {
                *cur = scr;
            }
        }
    }

    pub fn threshold_for(&self, class: usize) -> Result<f64> {
        self.check_class(class)?;
        Ok(self.current[class])
    }

    pub fn scratch_for(&self, class: usize) -> Result<f64> {
        self.check_class(class)?;
        Ok(self.scratch[class])
    }

    /// Live thresholds, indexed by class.
    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn scratch(&self) -> &[f64] {
        &self.scratch
    }

    /// Overwrites one live threshold. Values must lie in `(0, 0.95]`.
    pub fn set_threshold(&mut self, class: usize, value: f64) -> Result<()> {
        self.check_class(class)?;
        check_value("t_current", value)?;
        self.current[class] = value;
        Ok(())
    }

    pub fn records(&self) -> Vec<ThresholdRecord> {
        self.current
            .iter()
            .zip(&self.scratch)
            .enumerate()
            .map(|(class_index, (&t_current, &t_scratch))| ThresholdRecord {
                class_index,
                t_current,
                t_scratch,
            })
            .collect()
    }

    /// Rebuilds a registry from records; every class index in
    /// `0..records.len()` must appear exactly once.
    pub fn from_records(records: &[ThresholdRecord]) -> Result<Self> {
        let n = records.len();
        let mut reg = ThresholdRegistry::new(n)?;
        let mut seen = vec![false; n];
        for r in records {
            if r.class_index >= n || seen[r.class_index] {
                return Err(Error::format(
                    "class_index",
                    format!("duplicate or out-of-range class index {}", r.class_index),
                ));
            }
            seen[r.class_index] = true;
            check_value("t_current", r.t_current)?;
            check_value("t_scratch", r.t_scratch)?;
            reg.current[r.class_index] = r.t_current;
            reg.scratch[r.class_index] = r.t_scratch;
        }
        Ok(reg)
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class < self.num_classes() {
            Ok(())
        } else {
            Err(Error::param(format!(
                "class index {class} out of range for {} classes",
                self.num_classes()
            )))
        }
    }
}

impl Serialize for ThresholdRegistry {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.records().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ThresholdRegistry {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let records = Vec::<ThresholdRecord>::deserialize(deserializer)?;
        ThresholdRegistry::from_records(&records).map_err(serde::de::Error::custom)
    }
}

fn check_value(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value <= INITIAL_THRESHOLD {
        Ok(())
    } else {
        Err(Error::format(field, format!("threshold {value} outside (0, 0.95]")))
    }
}
