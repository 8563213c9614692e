//! Versioned model checkpoints: one JSON container for every model kind,
//! carrying the gate, the quantile levels, the training scaler and the full
//! parameter payload. Loading reproduces bit-identical forecasts.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::evaluate::TrainedModel;
use crate::pipeline::Scaler;
use crate::report::RunMeta;
use crate::types::{Gate, QuantileLevels};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint was written for gate {stored}, requested {requested}")]
    GateMismatch { stored: Gate, requested: Gate },
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub gate: Gate,
    pub levels: QuantileLevels,
    pub capacity_kw: f64,
    /// Seed, config hash, dataset fingerprint and crate versions.
    pub meta: RunMeta,
    pub scaler: Scaler,
    pub model: TrainedModel,
}

impl Checkpoint {
    pub fn new(
        gate: Gate,
        levels: QuantileLevels,
        capacity_kw: f64,
        meta: RunMeta,
        scaler: Scaler,
        model: TrainedModel,
    ) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            gate,
            levels,
            capacity_kw,
            meta,
            scaler,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let json = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&json)?;
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(ckpt.format_version));
        }
        Ok(ckpt)
    }

    pub fn check_gate(&self, requested: Gate) -> Result<(), CheckpointError> {
        if self.gate == requested {
            Ok(())
        } else {
            Err(CheckpointError::GateMismatch {
                stored: self.gate,
                requested,
            })
        }
    }
}
