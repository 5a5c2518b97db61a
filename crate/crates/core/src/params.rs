//! Parameter types shared by the generative model, the ERM trainer and the
//! asymptotic solver.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TmixError};

/// Group membership. `Plus` is the group drawn with probability `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Plus, Group::Minus];

    /// +1 for `Plus`, -1 for `Minus`.
    pub fn sign(self) -> f64 {
        match self {
            Group::Plus => 1.0,
            Group::Minus => -1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Group::Plus => 0,
            Group::Minus => 1,
        }
    }

    pub fn other(self) -> Group {
        match self {
            Group::Plus => Group::Minus,
            Group::Minus => Group::Plus,
        }
    }

    pub fn from_sign(s: i8) -> Group {
        if s >= 0 {
            Group::Plus
        } else {
            Group::Minus
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Group::Plus => 1,
            Group::Minus => -1,
        }
    }
}

/// All parameters of the teacher-mixture data distribution.
///
/// Teacher norms are fixed to one; `m_tilde_*` are teacher/shift overlaps
/// `W_T^c . v / d` and `q_teacher` is `W_T^+ . W_T^- / d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerativeParams {
    pub rho: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub m_tilde_plus: f64,
    pub m_tilde_minus: f64,
    pub q_teacher: f64,
    pub b_tilde_plus: f64,
    pub b_tilde_minus: f64,
    pub alpha: f64,
}

impl Default for GenerativeParams {
    fn default() -> Self {
        Self {
            rho: 0.5,
            delta_plus: 0.5,
            delta_minus: 0.5,
            m_tilde_plus: 0.0,
            m_tilde_minus: 0.0,
            q_teacher: 1.0,
            b_tilde_plus: 0.0,
            b_tilde_minus: 0.0,
            alpha: 0.5,
        }
    }
}

impl GenerativeParams {
    pub fn delta(&self, c: Group) -> f64 {
        match c {
            Group::Plus => self.delta_plus,
            Group::Minus => self.delta_minus,
        }
    }

    pub fn m_tilde(&self, c: Group) -> f64 {
        match c {
            Group::Plus => self.m_tilde_plus,
            Group::Minus => self.m_tilde_minus,
        }
    }

    pub fn b_tilde(&self, c: Group) -> f64 {
        match c {
            Group::Plus => self.b_tilde_plus,
            Group::Minus => self.b_tilde_minus,
        }
    }

    /// Probability of drawing group `c`.
    pub fn prior(&self, c: Group) -> f64 {
        match c {
            Group::Plus => self.rho,
            Group::Minus => 1.0 - self.rho,
        }
    }

    /// Mean of the teacher pre-activation `c m~_c + b~_c` for group `c`.
    pub fn teacher_mean(&self, c: Group) -> f64 {
        c.sign() * self.m_tilde(c) + self.b_tilde(c)
    }

    /// Gram matrix of `(v, W_T^+, W_T^-)` normalised by `d`.
    pub fn gram(&self) -> [[f64; 3]; 3] {
        let (mp, mm, q) = (self.m_tilde_plus, self.m_tilde_minus, self.q_teacher);
        [[1.0, mp, mm], [mp, 1.0, q], [mm, q, 1.0]]
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.rho,
            self.delta_plus,
            self.delta_minus,
            self.m_tilde_plus,
            self.m_tilde_minus,
            self.q_teacher,
            self.b_tilde_plus,
            self.b_tilde_minus,
            self.alpha,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(invalid("generative", "all parameters must be finite"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(invalid("rho", format!("{} is not in (0, 1)", self.rho)));
        }
        if self.delta_plus <= 0.0 {
            return Err(invalid("delta_plus", "must be > 0"));
        }
        if self.delta_minus <= 0.0 {
            return Err(invalid("delta_minus", "must be > 0"));
        }
        if self.alpha <= 0.0 {
            return Err(invalid("alpha", "must be > 0"));
        }
        for (field, v) in [
            ("m_tilde_plus", self.m_tilde_plus),
            ("m_tilde_minus", self.m_tilde_minus),
            ("q_teacher", self.q_teacher),
        ] {
            if v.abs() > 1.0 {
                return Err(invalid(field, format!("{v} is not in [-1, 1]")));
            }
        }
        let min_eig = crate::linalg::min_eigenvalue_sym3(&self.gram());
        if min_eig < -1e-12 {
            return Err(TmixError::InfeasibleGeometry {
                min_eigenvalue: min_eig,
            });
        }
        Ok(())
    }

    /// Group-relabelled problem: group `+` of the result is group `-` of `self`
    /// seen with the shift vector and the labels reversed.
    pub fn swapped(&self) -> Self {
        Self {
            rho: 1.0 - self.rho,
            delta_plus: self.delta_minus,
            delta_minus: self.delta_plus,
            m_tilde_plus: self.m_tilde_minus,
            m_tilde_minus: self.m_tilde_plus,
            q_teacher: self.q_teacher,
            b_tilde_plus: -self.b_tilde_minus,
            b_tilde_minus: -self.b_tilde_plus,
            alpha: self.alpha,
        }
    }
}

/// Loss reweighing by (group, label).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReweighWeights {
    pub w_group_plus: f64,
    pub w_label_one: f64,
}

impl Default for ReweighWeights {
    fn default() -> Self {
        Self::NEUTRAL
    }
}

impl ReweighWeights {
    pub const NEUTRAL: ReweighWeights = ReweighWeights {
        w_group_plus: 0.5,
        w_label_one: 0.5,
    };

    pub fn new(w_group_plus: f64, w_label_one: f64) -> Result<Self> {
        let rw = Self {
            w_group_plus,
            w_label_one,
        };
        rw.validate()?;
        Ok(rw)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("w_group_plus", self.w_group_plus),
            ("w_label_one", self.w_label_one),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(field, format!("{v} is not in [0, 1]")));
            }
        }
        Ok(())
    }

    /// Effective loss weight `W_(c, y)`, normalised so that `(0.5, 0.5)`
    /// gives weight 1 on every sample. `y` is +1 or -1.
    pub fn weight(&self, c: Group, y: f64) -> f64 {
        let g = match c {
            Group::Plus => self.w_group_plus,
            Group::Minus => 1.0 - self.w_group_plus,
        };
        let l = if y > 0.0 {
            self.w_label_one
        } else {
            1.0 - self.w_label_one
        };
        4.0 * g * l
    }

    /// The 2x2 matrix `W`; rows are groups (+, -), columns labels (1, 0).
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [
            [self.weight(Group::Plus, 1.0), self.weight(Group::Plus, -1.0)],
            [self.weight(Group::Minus, 1.0), self.weight(Group::Minus, -1.0)],
        ]
    }
}

/// Macroscopic descriptors of a linear classifier `(w, b)`: `q = w.w/d`,
/// `m = w.v/d`, `r_c = w.W_T^c/d` and the bias.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Overlaps {
    pub q: f64,
    pub m: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub b: f64,
}

impl Overlaps {
    pub fn r(&self, c: Group) -> f64 {
        match c {
            Group::Plus => self.r_plus,
            Group::Minus => self.r_minus,
        }
    }

    pub fn max_abs_diff(&self, other: &Overlaps) -> f64 {
        [
            self.q - other.q,
            self.m - other.m,
            self.r_plus - other.r_plus,
            self.r_minus - other.r_minus,
            self.b - other.b,
        ]
        .iter()
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> TmixError {
    TmixError::InvalidParam {
        field,
        reason: reason.into(),
    }
}
