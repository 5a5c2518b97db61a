//! Parameter sweeps over solved (or simulated) models, per-criterion minima
//! and the two mitigation studies: loss reweighing and coupled students.

mod minima;
mod studies;
mod sweep;

pub use minima::{argmin_spread, change_point, find_minima};
pub use studies::{coupling_sweep, eta_robustness, reweigh_sweep, EtaRobustness, EtaStrategy};
pub use sweep::{run_sweep, simulate_point, solve_point};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exposure::{Membership, Strategy};
use crate::observables::{FairnessCriterion, FairnessReport};
use crate::params::{invalid, GenerativeParams, Overlaps, ReweighWeights};
use crate::replica::{OrderParams, SolverConfig};

/// Parameters a sweep axis can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Rho,
    QTeacher,
    /// Sets both group-shift overlaps to the same value.
    MTilde,
    DeltaPlus,
    DeltaMinus,
    /// Sets both teacher biases to the same value.
    BTilde,
    BTildePlus,
    BTildeMinus,
    Alpha,
    WGroupPlus,
    WLabelOne,
    Gamma,
    Eta,
    LambdaL2,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 14] = [
        SweepAxis::Rho,
        SweepAxis::QTeacher,
        SweepAxis::MTilde,
        SweepAxis::DeltaPlus,
        SweepAxis::DeltaMinus,
        SweepAxis::BTilde,
        SweepAxis::BTildePlus,
        SweepAxis::BTildeMinus,
        SweepAxis::Alpha,
        SweepAxis::WGroupPlus,
        SweepAxis::WLabelOne,
        SweepAxis::Gamma,
        SweepAxis::Eta,
        SweepAxis::LambdaL2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Rho => "rho",
            SweepAxis::QTeacher => "q_teacher",
            SweepAxis::MTilde => "m_tilde",
            SweepAxis::DeltaPlus => "delta_plus",
            SweepAxis::DeltaMinus => "delta_minus",
            SweepAxis::BTilde => "b_tilde",
            SweepAxis::BTildePlus => "b_tilde_plus",
            SweepAxis::BTildeMinus => "b_tilde_minus",
            SweepAxis::Alpha => "alpha",
            SweepAxis::WGroupPlus => "w_group_plus",
            SweepAxis::WLabelOne => "w_label_one",
            SweepAxis::Gamma => "gamma",
            SweepAxis::Eta => "eta",
            SweepAxis::LambdaL2 => "lambda_l2",
        }
    }

    pub fn apply(self, point: &mut BasePoint, value: f64) {
        let g = &mut point.generative;
        match self {
            SweepAxis::Rho => g.rho = value,
            SweepAxis::QTeacher => g.q_teacher = value,
            SweepAxis::MTilde => {
                g.m_tilde_plus = value;
                g.m_tilde_minus = value;
            }
            SweepAxis::DeltaPlus => g.delta_plus = value,
            SweepAxis::DeltaMinus => g.delta_minus = value,
            SweepAxis::BTilde => {
                g.b_tilde_plus = value;
                g.b_tilde_minus = value;
            }
            SweepAxis::BTildePlus => g.b_tilde_plus = value,
            SweepAxis::BTildeMinus => g.b_tilde_minus = value,
            SweepAxis::Alpha => g.alpha = value,
            SweepAxis::WGroupPlus => point.reweigh.w_group_plus = value,
            SweepAxis::WLabelOne => point.reweigh.w_label_one = value,
            SweepAxis::Gamma => point.gamma = value,
            SweepAxis::Eta => point.eta = value,
            SweepAxis::LambdaL2 => point.lambda_l2 = value,
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(axis: SweepAxis, start: f64, stop: f64, count: usize) -> Self {
        Self { axis, start, stop, count }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 })
            .collect()
    }
}

/// Everything that defines one model: data law, regularisation, reweighing
/// and membership handling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasePoint {
    pub generative: GenerativeParams,
    pub lambda_l2: f64,
    pub gamma: f64,
    pub reweigh: ReweighWeights,
    pub strategy: Strategy,
    pub eta: f64,
}

impl Default for BasePoint {
    fn default() -> Self {
        Self {
            generative: GenerativeParams::default(),
            lambda_l2: 0.1,
            gamma: 0.0,
            reweigh: ReweighWeights::NEUTRAL,
            strategy: Strategy::Single,
            eta: 1.0,
        }
    }
}

impl BasePoint {
    pub fn membership(&self) -> Membership {
        Membership { strategy: self.strategy, eta: self.eta }
    }

    pub fn validate(&self) -> Result<()> {
        self.generative.validate()?;
        self.reweigh.validate()?;
        self.membership().validate()?;
        if !(self.lambda_l2 >= 0.0 && self.lambda_l2.is_finite()) {
            return Err(invalid("lambda_l2", "must be finite and >= 0"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", "must be finite and >= 0"));
        }
        if self.strategy == Strategy::Single && self.gamma != 0.0 {
            return Err(invalid("gamma", "coupling needs the coupled strategy"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    #[default]
    Theory,
    Simulation,
    Both,
}

impl SweepMode {
    pub fn theory(self) -> bool {
        matches!(self, SweepMode::Theory | SweepMode::Both)
    }

    pub fn simulation(self) -> bool {
        matches!(self, SweepMode::Simulation | SweepMode::Both)
    }
}

/// Finite-size settings for simulation mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    pub d: usize,
    pub seeds: usize,
    pub seed: u64,
    pub tol_grad: Option<f64>,
    pub max_iter: usize,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            d: 1000,
            seeds: 20,
            seed: 0,
            tol_grad: None,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<AxisSpec>,
    #[serde(default)]
    pub base: BasePoint,
    #[serde(default)]
    pub mode: SweepMode,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationSettings,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(invalid("axes", format!("{} axes (need 1 or 2)", self.axes.len())));
        }
        for a in &self.axes {
            if a.count < 1 {
                return Err(invalid("axes", format!("{} has no points", a.axis)));
            }
            if !(a.start.is_finite() && a.stop.is_finite()) {
                return Err(invalid("axes", format!("{} range is not finite", a.axis)));
            }
        }
        if self.axes.len() == 2 && overlapping(self.axes[0].axis, self.axes[1].axis) {
            return Err(invalid("axes", "axes must name distinct parameters"));
        }
        self.solver.validate()?;
        if self.mode.simulation() && (self.simulation.d == 0 || self.simulation.seeds == 0) {
            return Err(invalid("simulation", "d and seeds must be >= 1"));
        }
        Ok(())
    }

    /// Shape of the grid, first axis first.
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    /// The model at grid index `index`.
    pub fn point(&self, index: &[usize]) -> BasePoint {
        let mut p = self.base;
        for (a, &i) in self.axes.iter().zip(index) {
            a.axis.apply(&mut p, a.values()[i]);
        }
        p
    }

    /// Coordinates of grid index `index`.
    pub fn coords(&self, index: &[usize]) -> Vec<f64> {
        self.axes.iter().zip(index).map(|(a, &i)| a.values()[i]).collect()
    }
}

/// Replica prediction for one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCell {
    pub report: FairnessReport,
    pub theta: OrderParams,
    pub sweeps: usize,
    pub residual: f64,
    pub converged: bool,
    /// Per-student accuracy on each group, `[s][c]`.
    pub student_accuracy: Vec<[f64; 2]>,
}

/// Seed-averaged finite-size result for one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationCell {
    pub report: FairnessReport,
    /// Standard error of the per-group accuracies across seeds.
    pub acc_se: [f64; 2],
    /// Seed-averaged measured overlaps, one per student.
    pub overlaps: Vec<Overlaps>,
    pub student_accuracy: Vec<[f64; 2]>,
    pub seeds: usize,
    pub seeds_converged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub theory: Option<TheoryCell>,
    pub simulation: Option<SimulationCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub index: Vec<usize>,
    pub coords: Vec<f64>,
    /// Error message when the cell could not be evaluated.
    pub outcome: std::result::Result<CellOutcome, String>,
}

impl CellResult {
    /// Theory report when available, otherwise the simulated one.
    pub fn report(&self) -> Option<&FairnessReport> {
        let o = self.outcome.as_ref().ok()?;
        o.theory.as_ref().map(|t| &t.report).or(o.simulation.as_ref().map(|s| &s.report))
    }

    pub fn converged(&self) -> bool {
        match &self.outcome {
            Ok(o) => {
                o.theory.as_ref().is_none_or(|t| t.converged)
                    && o.simulation.as_ref().is_none_or(|s| s.seeds_converged == s.seeds)
            }
            Err(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Cells in row-major order of the grid index (last axis fastest).
    pub cells: Vec<CellResult>,
    /// Per-criterion argmin index; `None` when every cell failed.
    pub minima: BTreeMap<FairnessCriterion, Option<Vec<usize>>>,
}

impl SweepResult {
    pub fn shape(&self) -> Vec<usize> {
        self.spec.shape()
    }

    pub fn cell(&self, index: &[usize]) -> &CellResult {
        &self.cells[flat_index(&self.shape(), index)]
    }

    pub fn all_converged(&self) -> bool {
        self.cells.iter().all(CellResult::converged)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }
}

/// Whether two axes drive a common parameter.
fn overlapping(a: SweepAxis, b: SweepAxis) -> bool {
    use SweepAxis::{BTilde, BTildeMinus, BTildePlus};
    a == b || matches!((a, b), (BTilde, BTildePlus | BTildeMinus) | (BTildePlus | BTildeMinus, BTilde))
}

pub(crate) fn flat_index(shape: &[usize], index: &[usize]) -> usize {
    index.iter().zip(shape).fold(0, |acc, (&i, &n)| acc * n + i)
}

pub(crate) fn grid_indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = shape.iter().product();
    (0..total)
        .map(|mut k| {
            let mut idx = vec![0; shape.len()];
            for (slot, &n) in idx.iter_mut().zip(shape).rev() {
                *slot = k % n;
                k /= n;
            }
            idx
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values_hit_both_ends() {
        let a = AxisSpec::new(SweepAxis::Rho, 0.1, 0.5, 5);
        let v = a.values();
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[4], 0.5);
        assert!((v[2] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn grid_order_is_row_major() {
        let idx = grid_indices(&[2, 3]);
        assert_eq!(idx[0], vec![0, 0]);
        assert_eq!(idx[1], vec![0, 1]);
        assert_eq!(idx[3], vec![1, 0]);
        for (k, i) in idx.iter().enumerate() {
            assert_eq!(flat_index(&[2, 3], i), k);
        }
    }

    #[test]
    fn tied_axes_set_both_groups() {
        let mut p = BasePoint::default();
        SweepAxis::MTilde.apply(&mut p, 0.3);
        SweepAxis::BTilde.apply(&mut p, -0.2);
        assert_eq!((p.generative.m_tilde_plus, p.generative.m_tilde_minus), (0.3, 0.3));
        assert_eq!((p.generative.b_tilde_plus, p.generative.b_tilde_minus), (-0.2, -0.2));
    }

    #[test]
    fn axis_names_roundtrip_through_serde() {
        for a in SweepAxis::ALL {
            let s = serde_json::to_string(&a).unwrap();
            assert_eq!(s, format!("\"{}\"", a.name()));
            assert_eq!(serde_json::from_str::<SweepAxis>(&s).unwrap(), a);
        }
    }

    #[test]
    fn spec_validation() {
        let spec = SweepSpec {
            axes: vec![AxisSpec::new(SweepAxis::Rho, 0.1, 0.5, 3), AxisSpec::new(SweepAxis::Rho, 0.1, 0.5, 3)],
            base: BasePoint::default(),
            mode: SweepMode::Theory,
            solver: SolverConfig::default(),
            simulation: SimulationSettings::default(),
        };
        assert!(spec.validate().is_err());
        let tied = SweepSpec {
            axes: vec![AxisSpec::new(SweepAxis::BTilde, 0.0, 1.0, 3), AxisSpec::new(SweepAxis::BTildeMinus, 0.0, 1.0, 3)],
            ..spec.clone()
        };
        assert!(tied.validate().is_err());
        let split = SweepSpec {
            axes: vec![AxisSpec::new(SweepAxis::BTildePlus, 0.0, 1.0, 3), AxisSpec::new(SweepAxis::BTildeMinus, 0.0, 1.0, 3)],
            ..spec.clone()
        };
        assert!(split.validate().is_ok());
        let ok = SweepSpec { axes: vec![spec.axes[0]], ..spec };
        assert!(ok.validate().is_ok());
    }
}
