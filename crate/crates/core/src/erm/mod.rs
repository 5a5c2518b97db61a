//! Finite-size empirical risk minimisation: reweighed logistic regression with
//! L2 penalty, for one classifier or an elastically coupled pair.

mod lbfgs;
mod objective;
mod persist;
mod train;

pub use lbfgs::{minimize, LbfgsOutcome, Preconditioner};
pub use objective::{loss_and_gradient, Gradients, Objective};
pub use persist::{load_model, save_model, ModelSidecar};
pub use train::{
    assess_membership, evaluate, evaluate_deployed, split_dataset, train_coupled, train_single, train_slices,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::generative::Dataset;
use crate::params::{invalid, Group, Overlaps};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub lambda_l2: f64,
    pub gamma_couple: f64,
    /// Gradient-norm threshold; `None` means `1e-10 * n`.
    pub tol_grad: Option<f64>,
    pub max_iter: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lambda_l2: 0.1,
            gamma_couple: 0.0,
            tol_grad: None,
            max_iter: 100_000,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_l2 >= 0.0 && self.lambda_l2.is_finite()) {
            return Err(invalid("lambda_l2", "must be finite and >= 0"));
        }
        if !(self.gamma_couple >= 0.0 && self.gamma_couple.is_finite()) {
            return Err(invalid("gamma_couple", "must be finite and >= 0"));
        }
        if let Some(t) = self.tol_grad {
            if !(t > 0.0) {
                return Err(invalid("tol_grad", "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn tol_for(&self, n: usize) -> f64 {
        self.tol_grad.unwrap_or(1e-10 * n.max(1) as f64)
    }
}

/// Samples handed to one student, with the group each sample is believed to
/// belong to (this selects its reweighing weight).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slice {
    pub indices: Vec<usize>,
    pub believed: Vec<Group>,
}

impl Slice {
    /// Every sample, with its true group.
    pub fn whole(data: &Dataset) -> Slice {
        Slice {
            indices: (0..data.n()).collect(),
            believed: data.groups.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub final_grad_norm: f64,
    pub iterations: usize,
    /// Objective value of the whole (joint) problem at the returned point.
    pub loss: f64,
    pub measured: Overlaps,
}
