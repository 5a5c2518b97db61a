//! Gaussian tail functions, the logistic loss, and bivariate normal orthant
//! probabilities.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::quadrature::gauss_legendre;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Gaussian tail `H(x) = P(Z > x) = erfc(x / sqrt 2) / 2`.
pub fn h_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal CDF.
pub fn phi_cdf(x: f64) -> f64 {
    h_tail(-x)
}

pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Cross-entropy of a logistic output for a label `y` in {-1, +1}.
pub fn logistic_loss(y: f64, preact: f64) -> f64 {
    softplus(-y * preact)
}

/// Derivative of [`logistic_loss`] with respect to the pre-activation.
pub fn logistic_loss_grad(y: f64, preact: f64) -> f64 {
    -y * sigmoid(-y * preact)
}

/// Second derivative of [`logistic_loss`] with respect to the pre-activation.
pub fn logistic_loss_curv(preact: f64) -> f64 {
    let s = sigmoid(preact);
    s * (1.0 - s)
}

/// Upper orthant probability `P(X > h, Y > k)` for a standard bivariate
/// normal with correlation `r`.
///
/// Port of Genz's BVND (double-precision accuracy); Gauss-Legendre rules of
/// 6, 12 or 20 points depending on `|r|`.
pub fn bivariate_upper(h: f64, k: f64, r: f64) -> f64 {
    let r = r.clamp(-1.0, 1.0);
    let n = if r.abs() < 0.3 {
        6
    } else if r.abs() < 0.75 {
        12
    } else {
        20
    };
    let (nodes, weights) = gauss_legendre(n);
    // Negative half of the symmetric rule.
    let half: Vec<(f64, f64)> = nodes
        .iter()
        .zip(weights.iter())
        .filter(|(x, _)| **x < 0.0)
        .map(|(&x, &w)| (x, w))
        .collect();

    let two_pi = 2.0 * PI;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for &(x, w) in &half {
            let sn = (asr * (x + 1.0) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            let sn = (asr * (1.0 - x) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        return bvn * asr / (2.0 * two_pi) + phi_cdf(-h) * phi_cdf(-k);
    }

    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k).powi(2);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / as_ + hk) / 2.0).exp()
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp()
                * two_pi.sqrt()
                * phi_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for &(x, w) in &half {
            for sign in [-1.0, 1.0] {
                let xs = (a * (sign * x + 1.0)).powi(2);
                let rs = (1.0 - xs).sqrt();
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    bvn += a
                        * w
                        * asr.exp()
                        * ((-hk * xs / (2.0 * (1.0 + rs).powi(2))).exp() / rs
                            - (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / two_pi;
    }
    if r > 0.0 {
        bvn += phi_cdf(-h.max(k));
    } else {
        bvn = -bvn + (phi_cdf(-h) - phi_cdf(-k)).max(0.0);
    }
    bvn.clamp(0.0, 1.0)
}
