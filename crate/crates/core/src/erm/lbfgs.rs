//! Limited-memory BFGS with a fixed symmetric positive-definite
//! preconditioner and Armijo backtracking.

use std::collections::VecDeque;

const MEMORY: usize = 10;
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACK: usize = 60;

/// Block-diagonal approximation of the inverse Hessian.
///
/// Weight coordinate `i` of the two students forms a 2x2 block
/// `[[c1 + g, -g], [-g, c2 + g]]`; biases are scalar blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    d: usize,
    /// Inverse of each weight block, stored as `(a, b, c)` for `[[a, b], [b, c]]`.
    weight_inv: (f64, f64, f64),
    /// Inverse bias curvature of each student.
    bias_inv: Vec<f64>,
    students: usize,
}

impl Preconditioner {
    /// `bounds[s] = (weight curvature, bias curvature)`.
    pub fn new(d: usize, bounds: &[(f64, f64)], gamma: f64) -> Self {
        let floor = |x: f64| x.max(1e-12);
        let bias_inv = bounds.iter().map(|&(_, cb)| 1.0 / floor(cb)).collect();
        let weight_inv = match bounds {
            [(c, _)] => (1.0 / floor(*c), 0.0, 0.0),
            [(c1, _), (c2, _)] => {
                let (a1, a2) = (floor(*c1), floor(*c2));
                let det = a1 * a2 + gamma * (a1 + a2);
                ((a2 + gamma) / det, gamma / det, (a1 + gamma) / det)
            }
            _ => (1.0, 0.0, 0.0),
        };
        Self {
            d,
            weight_inv,
            bias_inv,
            students: bounds.len(),
        }
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let d = self.d;
        let block = d + 1;
        let (a, b, c) = self.weight_inv;
        if self.students == 2 {
            for i in 0..d {
                let (x1, x2) = (v[i], v[block + i]);
                out[i] = a * x1 + b * x2;
                out[block + i] = b * x1 + c * x2;
            }
        } else {
            for i in 0..d {
                out[i] = a * v[i];
            }
        }
        for s in 0..self.students {
            out[s * block + d] = self.bias_inv[s] * v[s * block + d];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `f` (which returns the value and fills the gradient) from `x0`
/// until the Euclidean gradient norm drops to `tol`.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, pre: &Preconditioner, tol: f64, max_iter: usize) -> LbfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut alphas = vec![0.0; MEMORY];

    let mut iterations = 0;
    let mut grad_norm = dot(&g, &g).sqrt();
    while grad_norm > tol && iterations < max_iter {
        iterations += 1;

        // two-loop recursion, q <- H g
        let mut q = g.clone();
        for (k, (s, y, rho)) in history.iter().enumerate().rev() {
            let a = rho * dot(s, &q);
            alphas[k] = a;
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        }
        pre.apply(&q, &mut scratch);
        if let Some((s, y, _)) = history.back() {
            // scale so the preconditioned model matches the latest curvature pair
            let mut hy = vec![0.0; n];
            pre.apply(y, &mut hy);
            let tau = dot(s, y) / dot(y, &hy);
            if tau.is_finite() && tau > 0.0 {
                scratch.iter_mut().for_each(|v| *v *= tau);
            }
        }
        for (k, (s, y, rho)) in history.iter().enumerate() {
            let beta = rho * dot(y, &scratch);
            let a = alphas[k];
            scratch.iter_mut().zip(s).for_each(|(ri, si)| *ri += (a - beta) * si);
        }
        dir.iter_mut().zip(&scratch).for_each(|(d, r)| *d = -r);

        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            // not a descent direction: restart from the preconditioned gradient
            history.clear();
            pre.apply(&g, &mut scratch);
            dir.iter_mut().zip(&scratch).for_each(|(d, r)| *d = -r);
            slope = dot(&g, &dir);
        }

        let mut step = 1.0;
        let mut accepted = false;
        let mut new_value = value;
        for _ in 0..MAX_BACKTRACK {
            x_new.iter_mut().zip(&x).zip(&dir).for_each(|((xn, xi), di)| *xn = xi + step * di);
            new_value = f(&x_new, &mut g_new);
            if new_value.is_finite() {
                let armijo = new_value <= value + ARMIJO_C * step * slope;
                // at the rounding floor of the loss, accept any step that
                // lowers the gradient norm
                let floor = new_value - value <= 1e-13 * (1.0 + value.abs())
                    && dot(&g_new, &g_new) < grad_norm * grad_norm;
                if armijo || floor {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        value = new_value;
        grad_norm = dot(&g, &g).sqrt();
    }
    LbfgsOutcome {
        x,
        value,
        grad_norm,
        iterations,
        converged: grad_norm <= tol,
    }
}
