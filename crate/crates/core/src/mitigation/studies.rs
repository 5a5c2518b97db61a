use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exposure::Strategy;
use crate::observables::FairnessCriterion;

use super::minima::{argmin_spread, change_point};
use super::sweep::run_sweep;
use super::{AxisSpec, SweepAxis, SweepResult, SweepSpec};

/// `(start, stop, count)` of one axis.
pub type Range = (f64, f64, usize);

fn axis(a: SweepAxis, r: Range) -> AxisSpec {
    AxisSpec::new(a, r.0, r.1, r.2)
}

/// Two-dimensional `(w_group_plus, w_label_one)` grid, both over `range`.
pub fn reweigh_sweep(template: &SweepSpec, range: Range, workers: Option<usize>) -> Result<SweepResult> {
    let spec = SweepSpec {
        axes: vec![axis(SweepAxis::WGroupPlus, range), axis(SweepAxis::WLabelOne, range)],
        ..template.clone()
    };
    run_sweep(&spec, workers)
}

/// Coupled students swept over the coupling strength at membership fidelity
/// `eta`.
pub fn coupling_sweep(template: &SweepSpec, gamma: Range, eta: f64, workers: Option<usize>) -> Result<SweepResult> {
    let mut spec = SweepSpec {
        axes: vec![axis(SweepAxis::Gamma, gamma)],
        ..template.clone()
    };
    spec.base.strategy = Strategy::Coupled;
    spec.base.eta = eta;
    run_sweep(&spec, workers)
}

/// Mitigation swept at each membership fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum EtaStrategy {
    /// One classifier; the group weight is applied with the assessed group.
    Reweigh { w_group_plus: Range },
    /// Coupled pair; the data split uses the assessed group.
    Coupled { gamma: Range },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRobustness {
    /// Grid over (mitigation parameter, eta).
    pub result: SweepResult,
    pub etas: Vec<f64>,
    /// Normalised spread of the per-criterion argmins along the mitigation
    /// axis, one per eta (`None` when every cell of that column failed).
    pub spreads: Vec<Option<f64>>,
    /// Fidelity below which the argmins stop agreeing, from a single
    /// mean-shift change point of the spread scanned from high to low eta.
    pub threshold: Option<f64>,
}

/// The column of `result` at second-axis index `j`, as a one-axis result.
fn column(result: &SweepResult, j: usize) -> SweepResult {
    let spec = SweepSpec {
        axes: vec![result.spec.axes[0]],
        ..result.spec.clone()
    };
    let cells = result
        .cells
        .iter()
        .filter(|c| c.index[1] == j)
        .map(|c| {
            let mut c = c.clone();
            c.index.truncate(1);
            c.coords.truncate(1);
            c
        })
        .collect();
    SweepResult { spec, cells, minima: Default::default() }
}

pub fn eta_robustness(
    template: &SweepSpec,
    etas: Range,
    strategy: EtaStrategy,
    workers: Option<usize>,
) -> Result<EtaRobustness> {
    let mut spec = template.clone();
    spec.base.gamma = 0.0;
    let first = match strategy {
        EtaStrategy::Reweigh { w_group_plus } => {
            spec.base.strategy = Strategy::Single;
            axis(SweepAxis::WGroupPlus, w_group_plus)
        }
        EtaStrategy::Coupled { gamma } => {
            spec.base.strategy = Strategy::Coupled;
            axis(SweepAxis::Gamma, gamma)
        }
    };
    spec.axes = vec![first, axis(SweepAxis::Eta, etas)];
    let result = run_sweep(&spec, workers)?;
    let eta_values = spec.axes[1].values();
    let spreads: Vec<Option<f64>> = (0..eta_values.len())
        .map(|j| argmin_spread(&column(&result, j), &FairnessCriterion::ALL).ok())
        .collect();

    // scan from the most to the least reliable membership
    let mut order: Vec<usize> = (0..eta_values.len()).filter(|&j| spreads[j].is_some()).collect();
    order.sort_by(|&a, &b| eta_values[b].total_cmp(&eta_values[a]));
    let series: Vec<f64> = order.iter().map(|&j| spreads[j].unwrap_or(0.0)).collect();
    let threshold = change_point(&series).and_then(|k| {
        let before = series[..k].iter().sum::<f64>() / k as f64;
        let after = series[k..].iter().sum::<f64>() / (series.len() - k) as f64;
        // only a rise in disagreement counts as a breakdown
        (after > before).then(|| 0.5 * (eta_values[order[k - 1]] + eta_values[order[k]]))
    });
    Ok(EtaRobustness {
        result,
        etas: eta_values,
        spreads,
        threshold,
    })
}
