use crate::error::{Result, TmixError};
use crate::quadrature::GaussHermite;

use super::energetic::{channel_bias_derivative, Channel};
use super::StudentOrder;

const BIAS_TOL: f64 = 1e-10;
const BRACKETS: [f64; 5] = [5.0, 10.0, 20.0, 40.0, 80.0];

/// `sum_cells alpha * d e / d b` for one student.
pub fn bias_derivative(st: &StudentOrder, channels: &[Channel], gh: &GaussHermite, tol: f64) -> f64 {
    channels
        .iter()
        .map(|ch| ch.alpha * channel_bias_derivative(st, ch, gh, tol))
        .sum()
}

/// Root of the bias equation. Brackets `[-B, B]` for B = 5, 10, .., 80 and
/// then runs Brent's method.
pub fn bias_solve(theta: &StudentOrder, channels: &[Channel], gh: &GaussHermite, tol: f64) -> Result<f64> {
    let f = |b: f64| {
        let st = StudentOrder { b, ..*theta };
        bias_derivative(&st, channels, gh, tol)
    };
    // Flat equation (no weighted data): any bias is optimal, keep 0.
    let f0 = f(0.0);
    if f0.abs() <= BIAS_TOL {
        return Ok(0.0);
    }
    for bound in BRACKETS {
        let (fa, fb) = (f(-bound), f(bound));
        if fa.signum() != fb.signum() || fa == 0.0 || fb == 0.0 {
            return Ok(brent(&f, -bound, bound, fa, fb));
        }
    }
    Err(TmixError::NoBracket {
        bound: BRACKETS[BRACKETS.len() - 1],
    })
}

/// Brent's root finder on a sign-changing bracket.
fn brent(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..200 {
        if fb.abs() <= BIAS_TOL || (b - a).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
            return b;
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let outside = !((s > lo.min(b)) && (s < lo.max(b)));
        let slow = if bisected {
            (s - b).abs() >= (b - c).abs() / 2.0
        } else {
            (s - b).abs() >= (c - d).abs() / 2.0
        };
        if outside || slow {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exposure::{Exposure, Membership};
    use crate::params::{GenerativeParams, ReweighWeights};
    use crate::replica::energetic::cell_channel;

    fn channels(gen: &GenerativeParams, rw: &ReweighWeights) -> Vec<Channel> {
        Exposure::build(gen, &Membership::single())
            .cells
            .iter()
            .map(|c| cell_channel(gen, rw, c))
            .collect()
    }

    fn theta() -> StudentOrder {
        StudentOrder {
            q: 0.9,
            m: 0.0,
            r_plus: 0.5,
            r_minus: 0.5,
            delta_q: 0.8,
            b: 0.0,
        }
    }

    #[test]
    fn brent_finds_cubic_root() {
        let f = |x: f64| x * x * x - 2.0;
        let r = brent(&f, 0.0, 3.0, f(0.0), f(3.0));
        assert!((r - 2f64.cbrt()).abs() < 1e-10);
    }

    #[test]
    fn symmetric_problem_has_zero_bias() {
        let gen = GenerativeParams::default();
        let gh = GaussHermite::new(120);
        let b = bias_solve(&theta(), &channels(&gen, &ReweighWeights::NEUTRAL), &gh, 1e-12).unwrap();
        assert!(b.abs() < 1e-9);
    }

    #[test]
    fn positive_teacher_bias_pushes_student_bias_up() {
        let gen = GenerativeParams {
            b_tilde_plus: 1.0,
            b_tilde_minus: 1.0,
            ..Default::default()
        };
        let gh = GaussHermite::new(120);
        let ch = channels(&gen, &ReweighWeights::NEUTRAL);
        assert!(bias_derivative(&theta(), &ch, &gh, 1e-12) > 0.0);
        let b = bias_solve(&theta(), &ch, &gh, 1e-12).unwrap();
        assert!(b > 0.0);
        let st = StudentOrder { b, ..theta() };
        assert!(bias_derivative(&st, &ch, &gh, 1e-12).abs() <= 1e-10);
    }

    #[test]
    fn label_weight_at_one_has_no_bracket() {
        let gen = GenerativeParams::default();
        let gh = GaussHermite::new(120);
        let rw = ReweighWeights::new(0.5, 1.0).unwrap();
        assert!(matches!(
            bias_solve(&theta(), &channels(&gen, &rw), &gh, 1e-12),
            Err(TmixError::NoBracket { .. })
        ));
    }
}
