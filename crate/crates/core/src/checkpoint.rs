//! JSON checkpoints holding everything needed to evaluate or resume a run.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::model::{Architecture, ModelParams, OptimConfig, OptimState};
use crate::prob::ProbVector;
use crate::threshold::ThresholdRegistry;
use crate::trainer::TrainState;

const FORMAT: &str = "adt-ssl-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Completed epochs.
    pub epoch: usize,
    pub architecture: Architecture,
    pub params: Vec<f64>,
    pub ema_params: Vec<f64>,
    pub velocity: Vec<f64>,
    pub optim: OptimConfig,
    pub step_count: u64,
    pub total_steps: u64,
    pub thresholds: ThresholdRegistry,
    pub q_bar_memory: Vec<(u64, ProbVector)>,
    /// Feature transform applied to every input before the model.
    pub standardizer: Option<Standardizer>,
    /// Resolved run configuration, in canonical text form.
    pub config: String,
}

impl Checkpoint {
    pub fn from_state(state: &TrainState, standardizer: Option<&Standardizer>, config_text: &str) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            epoch: state.epoch,
            architecture: state.params.arch().clone(),
            params: state.params.values().to_vec(),
            ema_params: state.opt.ema_params.values().to_vec(),
            velocity: state.opt.velocity().to_vec(),
            optim: state.opt.config(),
            step_count: state.opt.step_count,
            total_steps: state.opt.total_steps,
            thresholds: state.reg.clone(),
            q_bar_memory: state.q_bar_memory.iter().map(|(k, v)| (*k, v.clone())).collect(),
            standardizer: standardizer.cloned(),
            config: config_text.to_string(),
        }
    }

    pub fn to_state(&self) -> Result<TrainState> {
        let bad = |e: Error| Error::format("checkpoint", e.to_string());
        let params = ModelParams::from_values(self.architecture.clone(), self.params.clone()).map_err(bad)?;
        let ema = ModelParams::from_values(self.architecture.clone(), self.ema_params.clone()).map_err(bad)?;
        let opt = OptimState::from_parts(self.optim, self.step_count, self.total_steps, ema, self.velocity.clone())
            .map_err(bad)?;
        if self.thresholds.num_classes() != self.architecture.num_classes {
            return Err(Error::format("thresholds", "class count differs from the architecture"));
        }
        Ok(TrainState {
            params,
            opt,
            reg: self.thresholds.clone(),
            q_bar_memory: self.q_bar_memory.iter().cloned().collect::<BTreeMap<_, _>>(),
            epoch: self.epoch,
        })
    }

    /// EMA shadow weights.
    pub fn ema_model(&self) -> Result<ModelParams> {
        ModelParams::from_values(self.architecture.clone(), self.ema_params.clone())
            .map_err(|e| Error::format("ema_params", e.to_string()))
    }

    pub fn live_model(&self) -> Result<ModelParams> {
        ModelParams::from_values(self.architecture.clone(), self.params.clone())
            .map_err(|e| Error::format("params", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::format("checkpoint", e.to_string()))?;
        if ck.format != FORMAT {
            return Err(Error::format("format", format!("expected {FORMAT:?}, got {:?}", ck.format)));
        }
        if ck.version != VERSION {
            return Err(Error::format("version", format!("unsupported version {}", ck.version)));
        }
        ck.to_state()?;
        Ok(ck)
    }

    /// Writes atomically through a temporary sibling file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
