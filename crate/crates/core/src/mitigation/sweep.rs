use rayon::prelude::*;

use crate::erm::{assess_membership, split_dataset, train_slices, TrainHyper};
use crate::error::{Result, TmixError};
use crate::exposure::Strategy;
use crate::generative::{build_teacher_geometry, sample_dataset};
use crate::observables::{
    confusion_from_overlaps, deployed_report, FairnessCriterion, FairnessReport, JointConfusion,
};
use crate::params::{Group, Overlaps};
use crate::replica::{fixed_point_solve, OrderParams, SolverConfig};

use super::minima::find_minima;
use super::{
    flat_index, grid_indices, BasePoint, CellOutcome, CellResult, SimulationCell,
    SimulationSettings, SweepResult, SweepSpec, TheoryCell,
};

/// Replica solve and fairness report at one model, optionally warm-started.
///
/// A warm start that fails or does not converge is retried from the default
/// initial point, so the outcome does not depend on the neighbour used.
pub fn solve_point(point: &BasePoint, solver: &SolverConfig, init: Option<&OrderParams>) -> Result<TheoryCell> {
    point.validate()?;
    let cfg = SolverConfig { membership: point.membership(), ..*solver };
    let attempt = |init| fixed_point_solve(&point.generative, point.lambda_l2, point.gamma, &point.reweigh, &cfg, init);
    let sol = match init {
        Some(warm) => match attempt(Some(warm)) {
            Ok(s) if s.converged => s,
            _ => attempt(None)?,
        },
        None => attempt(None)?,
    };
    let report = deployed_report(&sol)?;
    let student_accuracy = sol
        .theta
        .students
        .iter()
        .map(|st| {
            let ov = st.overlaps();
            Ok([
                confusion_from_overlaps(&ov, &sol.gen, Group::Plus)?.accuracy(),
                confusion_from_overlaps(&ov, &sol.gen, Group::Minus)?.accuracy(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoryCell {
        report,
        theta: sol.theta,
        sweeps: sol.sweeps,
        residual: sol.residual,
        converged: sol.converged,
        student_accuracy,
    })
}

fn seed_pair(base: u64, k: usize) -> (u64, u64) {
    let s = base.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k as u64 * 2 + 1);
    (s, s ^ 0xd1b5_4a32_d192_ed03)
}

/// Seed-averaged finite-size training at one model. Accuracies use the exact
/// population confusion of each trained classifier (its measured overlaps),
/// so no test-set noise is added on top of the training-set fluctuations.
pub fn simulate_point(point: &BasePoint, sim: &SimulationSettings) -> Result<SimulationCell> {
    point.validate()?;
    if sim.d == 0 || sim.seeds == 0 {
        return Err(crate::params::invalid("simulation", "d and seeds must be >= 1"));
    }
    let gen = &point.generative;
    let membership = point.membership();
    let routing = membership.routing();
    let students = membership.strategy.students();
    let n = (gen.alpha * sim.d as f64).round() as usize;
    if n == 0 {
        return Err(crate::params::invalid("alpha", "alpha * d rounds to zero samples"));
    }
    let hyper = TrainHyper {
        lambda_l2: point.lambda_l2,
        gamma_couple: point.gamma,
        tol_grad: sim.tol_grad,
        max_iter: sim.max_iter,
    };

    // seeds train in parallel; the reduction below runs in seed order so the
    // sums do not depend on scheduling
    let trained = (0..sim.seeds)
        .into_par_iter()
        .map(|k| {
            let (teacher_seed, data_seed) = seed_pair(sim.seed, k);
            let teachers = build_teacher_geometry(gen, sim.d, teacher_seed)?;
            let data = sample_dataset(&teachers, gen, n, data_seed)?;
            let slices = match membership.strategy {
                Strategy::Single => vec![assess_membership(&data, membership.eta, data_seed ^ 1)],
                Strategy::Coupled => {
                    let (a, b) = split_dataset(&data, membership.eta, data_seed ^ 1);
                    vec![a, b]
                }
            };
            train_slices(&data, &slices, &teachers, &point.reweigh, &hyper, data_seed ^ 2)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean_conf = [[[0.0; 2]; 2]; 2];
    let mut per_seed_acc: Vec<[f64; 2]> = Vec::with_capacity(sim.seeds);
    let mut overlap_sums = vec![[0.0; 5]; students];
    let mut student_acc = vec![[0.0; 2]; students];
    let mut converged = 0;
    for models in &trained {
        if models.iter().all(|m| m.converged) {
            converged += 1;
        }
        let mut seed_acc = [0.0; 2];
        for c in Group::BOTH {
            let mut parts = Vec::with_capacity(students);
            for (s, m) in models.iter().enumerate() {
                let conf = confusion_from_overlaps(&m.measured, gen, c)?;
                student_acc[s][c.index()] += conf.accuracy() / sim.seeds as f64;
                if routing[s][c.index()] > 0.0 {
                    parts.push((routing[s][c.index()], conf));
                }
            }
            let deployed = JointConfusion::mixture(&parts);
            seed_acc[c.index()] = deployed.accuracy();
            for (dst, src) in mean_conf[c.index()].iter_mut().flatten().zip(deployed.p.iter().flatten()) {
                *dst += src / sim.seeds as f64;
            }
        }
        per_seed_acc.push(seed_acc);
        for (sum, m) in overlap_sums.iter_mut().zip(models) {
            let o = m.measured;
            for (x, v) in sum.iter_mut().zip([o.q, o.m, o.r_plus, o.r_minus, o.b]) {
                *x += v / sim.seeds as f64;
            }
        }
    }
    let acc_se = std::array::from_fn(|c| {
        let k = per_seed_acc.len() as f64;
        if k < 2.0 {
            return 0.0;
        }
        let mean = per_seed_acc.iter().map(|a| a[c]).sum::<f64>() / k;
        let var = per_seed_acc.iter().map(|a| (a[c] - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    });
    let report = FairnessReport::from_confusions(
        JointConfusion { p: mean_conf[0] },
        JointConfusion { p: mean_conf[1] },
        gen,
    );
    Ok(SimulationCell {
        report,
        acc_se,
        overlaps: overlap_sums
            .into_iter()
            .map(|a| Overlaps { q: a[0], m: a[1], r_plus: a[2], r_minus: a[3], b: a[4] })
            .collect(),
        student_accuracy: student_acc,
        seeds: sim.seeds,
        seeds_converged: converged,
    })
}

fn evaluate_line(spec: &SweepSpec, line: &[Vec<usize>]) -> Vec<CellResult> {
    let mut warm: Option<OrderParams> = None;
    line.iter()
        .map(|index| {
            let point = spec.point(index);
            let outcome = (|| -> Result<CellOutcome> {
                let theory = if spec.mode.theory() {
                    let cell = solve_point(&point, &spec.solver, warm.as_ref());
                    warm = match &cell {
                        Ok(c) if c.converged => Some(c.theta.clone()),
                        _ => None,
                    };
                    Some(cell?)
                } else {
                    None
                };
                let simulation = if spec.mode.simulation() {
                    Some(simulate_point(&point, &spec.simulation)?)
                } else {
                    None
                };
                Ok(CellOutcome { theory, simulation })
            })();
            CellResult {
                index: index.clone(),
                coords: spec.coords(index),
                outcome: outcome.map_err(|e| e.to_string()),
            }
        })
        .collect()
}

/// Evaluates every grid cell. Lines along the first axis run in parallel,
/// each one warm-starting the solver from its previous cell. A failing cell is
/// recorded with its error message and never aborts the sweep.
///
/// `workers = None` uses the global rayon pool.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<SweepResult> {
    spec.validate()?;
    let shape = spec.shape();
    let first = shape[0];
    let all = grid_indices(&shape);
    // group indices into lines sharing every coordinate but the first
    let mut lines: Vec<Vec<Vec<usize>>> = Vec::new();
    for rest in grid_indices(&shape[1..]) {
        let line = (0..first)
            .map(|i| std::iter::once(i).chain(rest.iter().copied()).collect())
            .collect();
        lines.push(line);
    }
    debug_assert_eq!(lines.iter().map(Vec::len).sum::<usize>(), all.len());

    let run = || lines.par_iter().map(|l| evaluate_line(spec, l)).collect::<Vec<_>>();
    let evaluated = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| TmixError::InvalidParam { field: "workers", reason: e.to_string() })?
            .install(run),
        None => run(),
    };

    let mut slots: Vec<Option<CellResult>> = vec![None; all.len()];
    for cell in evaluated.into_iter().flatten() {
        let k = flat_index(&shape, &cell.index);
        slots[k] = Some(cell);
    }
    let cells: Vec<CellResult> = slots.into_iter().map(|c| c.expect("every cell evaluated")).collect();
    let mut result = SweepResult {
        spec: spec.clone(),
        cells,
        minima: Default::default(),
    };
    for c in FairnessCriterion::ALL {
        result.minima.insert(c, find_minima(&result, c).ok());
    }
    Ok(result)
}
