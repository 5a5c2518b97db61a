use crate::error::{Result, TmixError};
use crate::observables::FairnessCriterion;

use super::SweepResult;

/// Values within this distance of the minimum count as ties.
const TIE_TOL: f64 = 1e-14;

fn center_distance(shape: &[usize], index: &[usize]) -> f64 {
    shape
        .iter()
        .zip(index)
        .map(|(&n, &i)| {
            let c = (n as f64 - 1.0) / 2.0;
            (i as f64 - c).powi(2)
        })
        .sum()
}

/// Grid index of the smallest `criterion` MI among evaluated cells. Ties go to
/// the cell closest to the grid centre, then to the lexicographically smallest
/// index. Only the evaluated grid is searched.
pub fn find_minima(result: &SweepResult, criterion: FairnessCriterion) -> Result<Vec<usize>> {
    let shape = result.shape();
    let scored: Vec<(&[usize], f64)> = result
        .cells
        .iter()
        .filter_map(|c| {
            let v = c.report()?.mi(criterion);
            v.is_finite().then_some((c.index.as_slice(), v))
        })
        .collect();
    let min = scored
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(TmixError::AllCellsFailed(criterion.name().to_string()));
    }
    let best = scored
        .into_iter()
        .filter(|&(_, v)| v - min <= TIE_TOL)
        .map(|(idx, _)| idx)
        .min_by(|a, b| {
            center_distance(&shape, a)
                .total_cmp(&center_distance(&shape, b))
                .then_with(|| a.cmp(b))
        })
        .expect("at least one finite cell");
    Ok(best.to_vec())
}

/// Largest pairwise distance between the argmins of `criteria`, with each
/// axis rescaled to unit length (index / (count - 1)).
pub fn argmin_spread(result: &SweepResult, criteria: &[FairnessCriterion]) -> Result<f64> {
    let shape = result.shape();
    let points = criteria
        .iter()
        .map(|&c| find_minima(result, c))
        .collect::<Result<Vec<_>>>()?;
    let scale: Vec<f64> = shape.iter().map(|&n| if n > 1 { 1.0 / (n - 1) as f64 } else { 0.0 }).collect();
    let mut spread = 0.0_f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d2: f64 = a
                .iter()
                .zip(b)
                .zip(&scale)
                .map(|((&x, &y), s)| ((x as f64 - y as f64) * s).powi(2))
                .sum();
            spread = spread.max(d2.sqrt());
        }
    }
    Ok(spread)
}

/// Single mean-shift change point of `series`: the split `k` (the second
/// segment starts at `k`) minimising the two-segment squared error. `None` for
/// fewer than two points or a constant series.
pub fn change_point(series: &[f64]) -> Option<usize> {
    if series.len() < 2 {
        return None;
    }
    let sse = |s: &[f64]| {
        let m = s.iter().sum::<f64>() / s.len() as f64;
        s.iter().map(|x| (x - m).powi(2)).sum::<f64>()
    };
    if sse(series) == 0.0 {
        return None;
    }
    (1..series.len()).min_by(|&a, &b| {
        let ca = sse(&series[..a]) + sse(&series[a..]);
        let cb = sse(&series[..b]) + sse(&series[b..]);
        ca.total_cmp(&cb)
    })
}
