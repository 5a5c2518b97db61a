//! Zero-temperature saddle-point equations for one student or a coupled pair.
//!
//! The order parameters of student `s` are `Q = |w|^2/d`, `m = w.v/d`,
//! `R_c = w.W_T^c/d`, the rescaled fluctuation `delta_q` and the bias `b`.
//! Their conjugates come from derivatives of the energetic term (one Gaussian
//! integral per exposure cell); the order parameters come back from the
//! closed-form entropic term. The loop is damped and iterated to a fixed point.

mod bias;
mod energetic;
mod entropic;
mod proximal;
mod solver;

pub use bias::{bias_derivative, bias_solve};
pub use energetic::{
    cell_channel, channel_gradient, channel_value, energetic_term, Channel, ChannelGradient,
};
pub use entropic::entropic_updates;
pub use proximal::{proximal, proximal_at, Prox};
pub use solver::{
    conjugate_updates, conjugates_from_energy, fixed_point_solve, student_channels, student_energy,
    update_sweep, StudentEnergy,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exposure::{Exposure, Membership};
use crate::params::{invalid, GenerativeParams, Group, Overlaps, ReweighWeights};

/// Order parameters of one student.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentOrder {
    pub q: f64,
    pub m: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub delta_q: f64,
    pub b: f64,
}

impl Default for StudentOrder {
    fn default() -> Self {
        Self {
            q: 1.0,
            m: 0.0,
            r_plus: 0.1,
            r_minus: 0.1,
            delta_q: 1.0,
            b: 0.0,
        }
    }
}

impl StudentOrder {
    pub fn r(&self, c: Group) -> f64 {
        match c {
            Group::Plus => self.r_plus,
            Group::Minus => self.r_minus,
        }
    }

    pub fn set_r(&mut self, c: Group, value: f64) {
        match c {
            Group::Plus => self.r_plus = value,
            Group::Minus => self.r_minus = value,
        }
    }

    pub fn overlaps(&self) -> Overlaps {
        Overlaps {
            q: self.q,
            m: self.m,
            r_plus: self.r_plus,
            r_minus: self.r_minus,
            b: self.b,
        }
    }

    fn as_array(&self) -> [f64; 6] {
        [self.q, self.m, self.r_plus, self.r_minus, self.delta_q, self.b]
    }

    fn from_array(a: [f64; 6]) -> Self {
        Self {
            q: a[0],
            m: a[1],
            r_plus: a[2],
            r_minus: a[3],
            delta_q: a[4],
            b: a[5],
        }
    }

    pub fn max_abs_diff(&self, other: &StudentOrder) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// `(1 - theta) * self + theta * other`.
    pub fn mix(&self, other: &StudentOrder, theta: f64) -> StudentOrder {
        let a = self.as_array();
        let b = other.as_array();
        Self::from_array(std::array::from_fn(|i| (1.0 - theta) * a[i] + theta * b[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderParams {
    pub students: Vec<StudentOrder>,
}

impl OrderParams {
    pub fn initial(students: usize) -> Self {
        Self {
            students: vec![StudentOrder::default(); students],
        }
    }

    pub fn max_abs_diff(&self, other: &OrderParams) -> f64 {
        self.students
            .iter()
            .zip(&other.students)
            .fold(0.0_f64, |acc, (a, b)| acc.max(a.max_abs_diff(b)))
    }
}

/// Conjugates of one student.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StudentConjugates {
    pub q_hat: f64,
    pub m_hat: f64,
    pub r_hat_plus: f64,
    pub r_hat_minus: f64,
    pub delta_q_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugateParams {
    pub students: Vec<StudentConjugates>,
}

/// How conjugate derivatives are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Derivatives {
    /// Central finite differences, step `1e-5 * max(1, |p|)`.
    #[default]
    FiniteDifference,
    /// Envelope-theorem derivatives of the proximal value.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub damping: f64,
    pub min_damping: f64,
    /// Consecutive residual increases before the damping is halved.
    pub patience: usize,
    pub tol_residual: f64,
    pub max_sweeps: usize,
    pub quadrature_order: usize,
    pub prox_tol: f64,
    pub membership: Membership,
    pub derivatives: Derivatives,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            min_damping: 1.0 / 64.0,
            patience: 10,
            tol_residual: 1e-9,
            max_sweeps: 5000,
            quadrature_order: 120,
            prox_tol: 1e-12,
            membership: Membership::default(),
            derivatives: Derivatives::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid("damping", format!("{} is not in (0, 1]", self.damping)));
        }
        if !(self.min_damping > 0.0 && self.min_damping <= self.damping) {
            return Err(invalid("min_damping", "must be in (0, damping]"));
        }
        if !(self.tol_residual > 0.0) {
            return Err(invalid("tol_residual", "must be > 0"));
        }
        if self.max_sweeps == 0 {
            return Err(invalid("max_sweeps", "must be >= 1"));
        }
        if self.quadrature_order < 40 {
            return Err(invalid("quadrature_order", "must be >= 40"));
        }
        if !(self.prox_tol > 0.0) {
            return Err(invalid("prox_tol", "must be > 0"));
        }
        self.membership.validate()
    }

    pub fn students(&self) -> usize {
        self.membership.strategy.students()
    }

    /// Exposure cells implied by the membership model and `gen`.
    pub fn exposure(&self, gen: &GenerativeParams) -> Exposure {
        Exposure::build(gen, &self.membership)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSolution {
    pub theta: OrderParams,
    pub theta_hat: ConjugateParams,
    pub residual: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub gen: GenerativeParams,
    pub reweigh: ReweighWeights,
    pub lambda_l2: f64,
    pub gamma: f64,
    pub config: SolverConfig,
}

impl SaddleSolution {
    pub fn student(&self, s: usize) -> &StudentOrder {
        &self.theta.students[s]
    }
}
