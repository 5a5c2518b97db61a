use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TmixError};
use crate::io::{read_with_sidecar, write_with_sidecar, RawMatrix};
use crate::params::Overlaps;

use super::{TrainHyper, TrainedModel};

/// JSON metadata stored next to the weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub bias: f64,
    pub hyper: TrainHyper,
    pub converged: bool,
    pub final_grad_norm: f64,
    pub iterations: usize,
    pub loss: f64,
    pub measured: Overlaps,
}

/// Writes the weights as a one-row TMIX matrix and the rest as JSON.
pub fn save_model(path: &Path, model: &TrainedModel, hyper: &TrainHyper) -> Result<()> {
    let raw = RawMatrix {
        d: model.weights.len(),
        n: 1,
        flags: 0,
        values: model.weights.clone(),
        labels: Vec::new(),
        groups: Vec::new(),
    };
    let meta = ModelSidecar {
        bias: model.bias,
        hyper: *hyper,
        converged: model.converged,
        final_grad_norm: model.final_grad_norm,
        iterations: model.iterations,
        loss: model.loss,
        measured: model.measured,
    };
    write_with_sidecar(path, &raw, &meta)
}

pub fn load_model(path: &Path) -> Result<(TrainedModel, TrainHyper)> {
    let (raw, meta): (RawMatrix, ModelSidecar) = read_with_sidecar(path)?;
    if raw.n != 1 {
        return Err(TmixError::Format(format!("model file holds {} rows, expected 1", raw.n)));
    }
    let model = TrainedModel {
        weights: raw.values,
        bias: meta.bias,
        converged: meta.converged,
        final_grad_norm: meta.final_grad_norm,
        iterations: meta.iterations,
        loss: meta.loss,
        measured: meta.measured,
    };
    Ok((model, meta.hyper))
}
