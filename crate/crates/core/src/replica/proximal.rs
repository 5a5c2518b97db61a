use crate::params::{GenerativeParams, Group};
use crate::special::{logistic_loss, sigmoid};

use super::StudentOrder;

/// Maximiser and value of `-l^2/2 - weight * loss(y, omega + scale * l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prox {
    pub lambda: f64,
    pub value: f64,
}

/// Solves the scalar proximal problem for the logistic loss.
///
/// Stationarity reads `l = weight * scale * y * sigmoid(-y (omega + scale l))`,
/// so the root lies between 0 and `weight * scale * y`. Newton steps that
/// leave the bracket, or fail to halve the step before last, are replaced by
/// bisection; this rules out the two-cycles plain Newton falls into when the
/// sigmoid is steep.
pub fn proximal(y: f64, omega: f64, scale: f64, weight: f64, tol: f64) -> Prox {
    let ws = weight * scale;
    if ws == 0.0 {
        return Prox {
            lambda: 0.0,
            value: -weight * logistic_loss(y, omega),
        };
    }
    let (mut lo, mut hi) = if y > 0.0 { (0.0, ws) } else { (-ws, 0.0) };
    let mut l = 0.5 * (lo + hi);
    let mut step_old = hi - lo;
    let mut step = step_old;
    for _ in 0..200 {
        let s = sigmoid(-y * (omega + scale * l));
        let gl = l - ws * y * s;
        if gl.abs() <= tol {
            break;
        }
        // g is increasing
        if gl > 0.0 {
            hi = l;
        } else {
            lo = l;
        }
        if hi - lo <= f64::EPSILON * l.abs().max(1e-300) {
            break;
        }
        let slope = 1.0 + ws * scale * s * (1.0 - s);
        let newton = gl / slope;
        let next = l - newton;
        if next > lo && next < hi && 2.0 * newton.abs() <= step_old.abs() {
            step_old = step;
            step = newton;
            l = next;
        } else {
            step_old = step;
            step = 0.5 * (hi - lo);
            l = 0.5 * (lo + hi);
        }
    }
    debug_assert!((l - ws * y * sigmoid(-y * (omega + scale * l))).is_finite());
    Prox {
        lambda: l,
        value: -0.5 * l * l - weight * logistic_loss(y, omega + scale * l),
    }
}

/// Proximal problem at Gaussian node `z` for group `c` and student `theta`.
pub fn proximal_at(
    y: f64,
    z: f64,
    c: Group,
    theta: &StudentOrder,
    gen: &GenerativeParams,
    weight: f64,
    tol: f64,
) -> Prox {
    let delta = gen.delta(c);
    let omega = c.sign() * theta.m + theta.b + (delta * theta.q).sqrt() * z;
    proximal(y, omega, (delta * theta.delta_q).sqrt(), weight, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn objective(y: f64, omega: f64, a: f64, w: f64, l: f64) -> f64 {
        -0.5 * l * l - w * logistic_loss(y, omega + a * l)
    }

    /// Grid search on [-10, 10] at step 1e-4, then golden-section refinement.
    fn grid_oracle(y: f64, omega: f64, a: f64, w: f64) -> f64 {
        let f = |l: f64| objective(y, omega, a, w, l);
        let mut best = -10.0;
        let mut best_v = f(best);
        let steps = 200_000;
        for i in 1..=steps {
            let l = -10.0 + i as f64 * 1e-4;
            let v = f(l);
            if v > best_v {
                best_v = v;
                best = l;
            }
        }
        let (mut lo, mut hi) = (best - 1e-4, best + 1e-4);
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        while hi - lo > 1e-12 {
            let x1 = hi - ratio * (hi - lo);
            let x2 = lo + ratio * (hi - lo);
            if f(x1) > f(x2) {
                hi = x2;
            } else {
                lo = x1;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn zero_weight_is_pure_quadratic() {
        let p = proximal(1.0, 0.3, 0.7, 0.0, 1e-12);
        assert_eq!(p.lambda, 0.0);
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn correct_side_far_away_vanishes() {
        let p = proximal(1.0, 60.0, 1.0, 1.0, 1e-12);
        assert!(p.lambda.abs() < 1e-20);
        assert!(p.value.abs() < 1e-20);
    }

    #[test]
    fn matches_grid_search_oracle() {
        // y=+1, Delta=1, delta_q=1, Q=1, z=0, m=0, b=0, weight=1
        let theta = StudentOrder {
            q: 1.0,
            m: 0.0,
            r_plus: 0.0,
            r_minus: 0.0,
            delta_q: 1.0,
            b: 0.0,
        };
        let gen = GenerativeParams {
            delta_plus: 1.0,
            delta_minus: 1.0,
            ..Default::default()
        };
        let p = proximal_at(1.0, 0.0, Group::Plus, &theta, &gen, 1.0, 1e-12);
        let want = grid_oracle(1.0, 0.0, 1.0, 1.0);
        assert!((p.lambda - want).abs() < 1e-6, "{} vs {want}", p.lambda);
        for (y, omega, a, w) in [(-1.0, 0.4, 0.8, 2.0), (1.0, -3.0, 2.5, 1.5), (-1.0, -2.0, 0.3, 4.0), (-1.0, 3.206514, 4.028393, 1.2489)] {
            let got = proximal(y, omega, a, w, 1e-12).lambda;
            assert!((got - grid_oracle(y, omega, a, w)).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn stationarity_holds(y in prop::bool::ANY, omega in -30.0..30.0f64, a in 0.0..10.0f64, w in 0.0..8.0f64) {
            let y = if y { 1.0 } else { -1.0 };
            let p = proximal(y, omega, a, w, 1e-12);
            let g = p.lambda - w * a * y * sigmoid(-y * (omega + a * p.lambda));
            prop_assert!(g.abs() <= 1e-11);
            // maximiser beats its neighbours
            for dl in [-1e-3, 1e-3] {
                prop_assert!(objective(y, omega, a, w, p.lambda + dl) <= p.value + 1e-15);
            }
        }

        #[test]
        fn steep_sigmoid_does_not_cycle(omega in 2.0..5.0f64, a in 3.0..6.0f64, w in 0.8..2.0f64) {
            let p = proximal(-1.0, omega, a, w, 1e-12);
            let g = p.lambda + w * a * sigmoid(omega + a * p.lambda);
            prop_assert!(g.abs() <= 1e-11, "residual {g}");
        }
    }
}
