use crate::error::{Result, TmixError};
use crate::generative::Dataset;
use crate::params::{invalid, ReweighWeights};
use crate::special::{logistic_loss, logistic_loss_grad};

use super::{Slice, TrainHyper};

/// Training objective over the flat parameter vector `[w_1, b_1, (w_2, b_2)]`.
pub struct Objective<'a> {
    pub data: &'a Dataset,
    pub slices: &'a [Slice],
    pub rw: ReweighWeights,
    pub lambda_l2: f64,
    pub gamma: f64,
    /// Per-sample weights of each slice, aligned with `slices[s].indices`.
    weights: Vec<Vec<f64>>,
}

impl<'a> Objective<'a> {
    pub fn new(data: &'a Dataset, slices: &'a [Slice], rw: &ReweighWeights, hyper: &TrainHyper) -> Result<Self> {
        hyper.validate()?;
        if slices.is_empty() || slices.len() > 2 {
            return Err(invalid("slices", format!("{} students (need 1 or 2)", slices.len())));
        }
        if slices.len() == 1 && hyper.gamma_couple != 0.0 {
            return Err(invalid("gamma_couple", "coupling needs two students"));
        }
        let mut weights = Vec::with_capacity(slices.len());
        for sl in slices {
            if sl.believed.len() != sl.indices.len() {
                return Err(TmixError::DimensionMismatch {
                    expected: sl.indices.len(),
                    got: sl.believed.len(),
                });
            }
            let mut ws = Vec::with_capacity(sl.len());
            for (&mu, &g) in sl.indices.iter().zip(&sl.believed) {
                if mu >= data.n() {
                    return Err(TmixError::DimensionMismatch { expected: data.n(), got: mu + 1 });
                }
                let w = rw.weight(g, data.label(mu));
                if w < 0.0 || !w.is_finite() {
                    return Err(TmixError::NegativeWeight(w));
                }
                ws.push(w);
            }
            weights.push(ws);
        }
        Ok(Self {
            data,
            slices,
            rw: *rw,
            lambda_l2: hyper.lambda_l2,
            gamma: hyper.gamma_couple,
            weights,
        })
    }

    pub fn students(&self) -> usize {
        self.slices.len()
    }

    pub fn dim(&self) -> usize {
        self.students() * (self.data.d + 1)
    }

    /// Per-student (weight-curvature bound, bias-curvature bound) used by the
    /// preconditioner.
    pub fn curvature_bounds(&self) -> Vec<(f64, f64)> {
        let d = self.data.d as f64;
        self.slices
            .iter()
            .zip(&self.weights)
            .map(|(sl, ws)| {
                let mut cw = 0.0;
                let mut cb = 0.0;
                for (&mu, &w) in sl.indices.iter().zip(ws) {
                    let x = self.data.row(mu);
                    cw += w * x.iter().map(|v| v * v).sum::<f64>() / (d * d);
                    cb += w;
                }
                (self.lambda_l2 + 0.25 * cw, 0.25 * cb)
            })
            .collect()
    }

    /// Loss value; writes the gradient into `grad`.
    pub fn eval(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.data.d;
        let block = d + 1;
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (s, (sl, ws)) in self.slices.iter().zip(&self.weights).enumerate() {
            let (w, rest) = x[s * block..].split_at(d);
            let b = rest[0];
            let (gw, grest) = grad[s * block..(s + 1) * block].split_at_mut(d);
            let mut gb = 0.0;
            for (&mu, &weight) in sl.indices.iter().zip(ws) {
                if weight == 0.0 {
                    continue;
                }
                let row = self.data.row(mu);
                let y = self.data.label(mu);
                let pre = crate::linalg::dot(w, row) * inv_sqrt_d + b;
                loss += weight * logistic_loss(y, pre);
                let g = weight * logistic_loss_grad(y, pre);
                gb += g;
                crate::linalg::axpy(g * inv_sqrt_d, row, gw);
            }
            grest[0] = gb;
            for (g, wi) in gw.iter_mut().zip(w) {
                *g += self.lambda_l2 * wi;
                loss += 0.5 * self.lambda_l2 * wi * wi;
            }
        }
        if self.students() == 2 && self.gamma != 0.0 {
            let (first, second) = x.split_at(block);
            let (g1, g2) = grad.split_at_mut(block);
            for i in 0..d {
                let diff = first[i] - second[i];
                loss += 0.5 * self.gamma * diff * diff;
                g1[i] += self.gamma * diff;
                g2[i] -= self.gamma * diff;
            }
        }
        loss
    }
}

/// Gradient blocks of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: f64,
    pub w2: Option<Vec<f64>>,
    pub b2: Option<f64>,
}

/// Reweighed cross-entropy plus penalties at `(w1, b1)` and optionally
/// `(w2, b2)`, with exact gradients.
#[allow(clippy::too_many_arguments)]
pub fn loss_and_gradient(
    w1: &[f64],
    b1: f64,
    second: Option<(&[f64], f64)>,
    data: &Dataset,
    slices: &[Slice],
    rw: &ReweighWeights,
    hyper: &TrainHyper,
) -> Result<(f64, Gradients)> {
    let d = data.d;
    if w1.len() != d {
        return Err(TmixError::DimensionMismatch { expected: d, got: w1.len() });
    }
    let expected_slices = if second.is_some() { 2 } else { 1 };
    if slices.len() != expected_slices {
        return Err(invalid("slices", "one slice per student"));
    }
    let obj = Objective::new(data, slices, rw, hyper)?;
    let mut x = w1.to_vec();
    x.push(b1);
    if let Some((w2, b2)) = second {
        if w2.len() != d {
            return Err(TmixError::DimensionMismatch { expected: d, got: w2.len() });
        }
        x.extend_from_slice(w2);
        x.push(b2);
    }
    let mut g = vec![0.0; x.len()];
    let loss = obj.eval(&x, &mut g);
    let grads = Gradients {
        w1: g[..d].to_vec(),
        b1: g[d],
        w2: second.map(|_| g[d + 1..2 * d + 1].to_vec()),
        b2: second.map(|_| g[2 * d + 1]),
    };
    Ok((loss, grads))
}
