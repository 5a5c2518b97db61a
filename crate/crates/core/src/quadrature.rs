//! Gauss-Hermite and Gauss-Legendre rules.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss-Hermite rule for the standard normal measure: `sum_i w_i f(z_i)`
/// approximates `E[f(Z)]`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let (x, w) = physicists_hermite(order);
        let nodes = x.iter().map(|xi| xi * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().map(|wi| wi / PI.sqrt()).collect();
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * f(z))
            .sum()
    }
}

/// Nodes and weights for `int e^{-x^2} f(x) dx`. Newton on the recurrence of
/// the orthonormal Hermite *functions* (polynomials times `e^{-x^2/2}`), which
/// stay bounded where the bare polynomials overflow.
fn physicists_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^{-1/4}
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4 * (-0.5 * z * z).exp();
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            // derivative of the scaled function, not of the bare polynomial
            z = z1 - p1 / (pp - z1 * p1);
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        let scaled = pp * (0.5 * z * z).exp();
        w[i] = 2.0 / (scaled * scaled);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre nodes and weights on [-1, 1]. Rules are memoised for the
/// small orders used by the orthant probabilities.
pub fn gauss_legendre(n: usize) -> (&'static [f64], &'static [f64]) {
    static CACHE: [OnceLock<(Vec<f64>, Vec<f64>)>; 3] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let slot = match n {
        6 => 0,
        12 => 1,
        20 => 2,
        _ => panic!("gauss_legendre: unsupported order {n}"),
    };
    let rule = CACHE[slot].get_or_init(|| legendre_rule(n));
    (&rule.0, &rule.1)
}

fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        for order in [10, 40, 120, 240] {
            let gh = GaussHermite::new(order);
            assert!((gh.integrate(|_| 1.0) - 1.0).abs() < 1e-13, "order {order}");
            assert!(gh.integrate(|z| z).abs() < 1e-13);
            assert!((gh.integrate(|z| z * z) - 1.0).abs() < 1e-12);
            assert!((gh.integrate(|z| z.powi(4)) - 3.0).abs() < 1e-11);
        }
    }

    #[test]
    fn hermite_integrates_smooth_function() {
        // E[cos Z] = e^{-1/2}
        let gh = GaussHermite::new(120);
        assert!((gh.integrate(f64::cos) - (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn legendre_rules_are_exact_for_polynomials() {
        for n in [6, 12, 20] {
            let (x, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-14);
            let m4: f64 = x.iter().zip(w).map(|(x, w)| w * x.powi(4)).sum();
            assert!((m4 - 0.4).abs() < 1e-14);
        }
    }
}
