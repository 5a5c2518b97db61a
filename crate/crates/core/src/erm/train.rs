use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, TmixError};
use crate::exposure::Membership;
use crate::generative::{empirical_overlaps, sample_dataset, Dataset, TeacherPair};
use crate::linalg::dot;
use crate::observables::JointConfusion;
use crate::params::{invalid, GenerativeParams, Group, ReweighWeights};

use super::lbfgs::{minimize, Preconditioner};
use super::objective::Objective;
use super::{Slice, TrainHyper, TrainedModel};

/// Assessed group of every sample: the true group with probability `eta`,
/// the other one otherwise. Feeds a single student whose reweighing uses the
/// assessed membership.
pub fn assess_membership(data: &Dataset, eta: f64, seed: u64) -> Slice {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let believed = data
        .groups
        .iter()
        .map(|&c| if rng.random::<f64>() < eta { c } else { c.other() })
        .collect();
    Slice {
        indices: (0..data.n()).collect(),
        believed,
    }
}

/// Distributes samples over two students: a sample of true group `c` goes to
/// the student of `c` with probability `eta`, otherwise to the other one. The
/// first slice belongs to group `+`.
pub fn split_dataset(data: &Dataset, eta: f64, seed: u64) -> (Slice, Slice) {
    let assessed = assess_membership(data, eta, seed);
    let mut out = [
        Slice { indices: Vec::new(), believed: Vec::new() },
        Slice { indices: Vec::new(), believed: Vec::new() },
    ];
    for (mu, believed) in assessed.believed.into_iter().enumerate() {
        let slice = &mut out[believed.index()];
        slice.indices.push(mu);
        slice.believed.push(believed);
    }
    let [a, b] = out;
    (a, b)
}

fn initial_point(d: usize, students: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..students * (d + 1))
        .map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Jointly trains one model per slice (two slices couple through `gamma`).
pub fn train_slices(
    data: &Dataset,
    slices: &[Slice],
    teachers: &TeacherPair,
    rw: &ReweighWeights,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<Vec<TrainedModel>> {
    if teachers.d != data.d {
        return Err(TmixError::DimensionMismatch { expected: data.d, got: teachers.d });
    }
    rw.validate()?;
    let obj = Objective::new(data, slices, rw, hyper)?;
    let pre = Preconditioner::new(data.d, &obj.curvature_bounds(), hyper.gamma_couple);
    let tol = hyper.tol_for(data.n());
    let out = minimize(
        |x, g| obj.eval(x, g),
        initial_point(data.d, slices.len(), seed),
        &pre,
        tol,
        hyper.max_iter,
    );
    let block = data.d + 1;
    (0..slices.len())
        .map(|s| {
            let w = out.x[s * block..s * block + data.d].to_vec();
            let b = out.x[s * block + data.d];
            let measured = empirical_overlaps(&w, b, teachers)?;
            Ok(TrainedModel {
                weights: w,
                bias: b,
                converged: out.converged,
                final_grad_norm: out.grad_norm,
                iterations: out.iterations,
                loss: out.value,
                measured,
            })
        })
        .collect()
}

pub fn train_single(
    data: &Dataset,
    teachers: &TeacherPair,
    rw: &ReweighWeights,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<TrainedModel> {
    if hyper.gamma_couple != 0.0 {
        return Err(invalid("gamma_couple", "coupling needs two students"));
    }
    let mut models = train_slices(data, &[Slice::whole(data)], teachers, rw, hyper, seed)?;
    Ok(models.remove(0))
}

/// Splits with fidelity `eta` and trains the coupled pair; model 0 serves
/// group `+`.
pub fn train_coupled(
    data: &Dataset,
    teachers: &TeacherPair,
    eta: f64,
    rw: &ReweighWeights,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<(TrainedModel, TrainedModel)> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(invalid("eta", format!("{eta} is not in [0, 1]")));
    }
    let (a, b) = split_dataset(data, eta, seed);
    let mut models = train_slices(data, &[a, b], teachers, rw, hyper, seed.wrapping_add(1))?;
    let second = models.pop().expect("two models");
    let first = models.pop().expect("two models");
    Ok((first, second))
}

fn fresh_test_set(teachers: &TeacherPair, gen: &GenerativeParams, n_test: usize, seed: u64) -> Result<Dataset> {
    if n_test == 0 {
        return Err(invalid("n_test", "must be >= 1"));
    }
    sample_dataset(teachers, gen, n_test, seed)
}

fn predict(model: &TrainedModel, x: &[f64]) -> f64 {
    let pre = dot(&model.weights, x) / (x.len() as f64).sqrt() + model.bias;
    if pre >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn slot(v: f64) -> usize {
    usize::from(v < 0.0)
}

fn normalise(counts: [[[u64; 2]; 2]; 2]) -> [JointConfusion; 2] {
    [JointConfusion::from_counts(counts[0]), JointConfusion::from_counts(counts[1])]
}

/// Empirical per-group joint distribution of `(y, y_hat)` on a fresh test set,
/// indexed by group (`+` first).
pub fn evaluate(
    model: &TrainedModel,
    teachers: &TeacherPair,
    gen: &GenerativeParams,
    n_test: usize,
    seed: u64,
) -> Result<[JointConfusion; 2]> {
    if model.weights.len() != teachers.d {
        return Err(TmixError::DimensionMismatch { expected: teachers.d, got: model.weights.len() });
    }
    let test = fresh_test_set(teachers, gen, n_test, seed)?;
    let mut counts = [[[0u64; 2]; 2]; 2];
    for mu in 0..test.n() {
        let y_hat = predict(model, test.row(mu));
        counts[test.groups[mu].index()][slot(test.label(mu))][slot(y_hat)] += 1;
    }
    Ok(normalise(counts))
}

/// Like [`evaluate`] for a coupled pair: each test sample is routed to the
/// student of its true group with probability `eta`.
pub fn evaluate_deployed(
    models: &[TrainedModel],
    membership: &Membership,
    teachers: &TeacherPair,
    gen: &GenerativeParams,
    n_test: usize,
    seed: u64,
) -> Result<[JointConfusion; 2]> {
    membership.validate()?;
    if models.len() != membership.strategy.students() {
        return Err(TmixError::DimensionMismatch {
            expected: membership.strategy.students(),
            got: models.len(),
        });
    }
    let test = fresh_test_set(teachers, gen, n_test, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_7e57);
    let mut counts = [[[0u64; 2]; 2]; 2];
    for mu in 0..test.n() {
        let c = test.groups[mu];
        let believed: Group = if rng.random::<f64>() < membership.eta { c } else { c.other() };
        let model = &models[membership.student_for(believed)];
        let y_hat = predict(model, test.row(mu));
        counts[c.index()][slot(test.label(mu))][slot(y_hat)] += 1;
    }
    Ok(normalise(counts))
}
