//! How the training set is distributed over the students.
//!
//! Each cell carries the fraction `alpha` of patterns (per input dimension)
//! from a true group that a student sees, and the group the sample is
//! *believed* to belong to. The believed group selects the reweighing weight
//! and, for the coupled strategy, the student.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::{invalid, GenerativeParams, Group};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// One classifier on the whole dataset.
    #[default]
    Single,
    /// Two classifiers, student 0 for believed group `+`, student 1 for `-`,
    /// joined by an elastic penalty.
    Coupled,
}

impl Strategy {
    pub fn students(self) -> usize {
        match self {
            Strategy::Single => 1,
            Strategy::Coupled => 2,
        }
    }
}

/// Strategy plus membership fidelity `eta` (probability that a sample's group
/// is assessed correctly).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Membership {
    pub strategy: Strategy,
    pub eta: f64,
}

impl Default for Membership {
    fn default() -> Self {
        Self {
            strategy: Strategy::Single,
            eta: 1.0,
        }
    }
}

impl Membership {
    pub fn single() -> Self {
        Self::default()
    }

    pub fn coupled(eta: f64) -> Self {
        Self {
            strategy: Strategy::Coupled,
            eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(invalid("eta", format!("{} is not in [0, 1]", self.eta)));
        }
        Ok(())
    }

    /// Student that handles samples believed to be in `group`.
    pub fn student_for(&self, group: Group) -> usize {
        match self.strategy {
            Strategy::Single => 0,
            Strategy::Coupled => group.index(),
        }
    }

    /// `P(student s | true group c)` at deployment, indexed `[s][c]`.
    pub fn routing(&self) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; self.strategy.students()];
        for c in Group::BOTH {
            for (believed, p) in [(c, self.eta), (c.other(), 1.0 - self.eta)] {
                out[self.student_for(believed)][c.index()] += p;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureCell {
    pub student: usize,
    pub true_group: Group,
    pub believed_group: Group,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    pub students: usize,
    pub cells: Vec<ExposureCell>,
}

impl Exposure {
    pub fn build(gen: &GenerativeParams, membership: &Membership) -> Exposure {
        let mut cells = Vec::with_capacity(4);
        for c in Group::BOTH {
            let base = gen.alpha * gen.prior(c);
            for (believed, p) in [(c, membership.eta), (c.other(), 1.0 - membership.eta)] {
                if p > 0.0 {
                    cells.push(ExposureCell {
                        student: membership.student_for(believed),
                        true_group: c,
                        believed_group: believed,
                        alpha: base * p,
                    });
                }
            }
        }
        Exposure {
            students: membership.strategy.students(),
            cells,
        }
    }

    /// `alpha_{s,c}`: patterns of true group `c` seen by student `s`.
    pub fn alpha_split(&self) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; self.students];
        for cell in &self.cells {
            out[cell.student][cell.true_group.index()] += cell.alpha;
        }
        out
    }

    pub fn total_alpha(&self) -> f64 {
        self.cells.iter().map(|c| c.alpha).sum()
    }

    pub fn for_student(&self, s: usize) -> impl Iterator<Item = &ExposureCell> {
        self.cells.iter().filter(move |c| c.student == s)
    }
}
