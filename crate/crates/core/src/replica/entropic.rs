//! Closed-form entropic updates.
//!
//! The student weights at the saddle are Gaussian: `A w = B` with
//! `A = [[lambda + gamma + dq^_1, -gamma], [-gamma, lambda + gamma + dq^_2]]`
//! (or the scalar `lambda + dq^` for one student) and
//! `B_s = m^_s v + sum_c R^_{s,c} W_T^c + sqrt(q^_s) z_s`. Projecting onto the
//! teacher geometry with Gram matrix `G` of `(v, W_T^+, W_T^-)` gives the
//! order parameters directly.

use crate::error::{Result, TmixError};
use crate::params::{invalid, GenerativeParams};

use super::{ConjugateParams, OrderParams, StudentConjugates, StudentOrder};

fn mat_vec(g: &[[f64; 3]; 3], a: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| (0..3).map(|j| g[i][j] * a[j]).sum())
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn field(c: &StudentConjugates) -> [f64; 3] {
    [c.m_hat, c.r_hat_plus, c.r_hat_minus]
}

/// Order parameters implied by the conjugates. Biases are left at 0; they
/// are fixed separately by the bias equation.
pub fn entropic_updates(
    theta_hat: &ConjugateParams,
    lambda_l2: f64,
    gamma: f64,
    gen: &GenerativeParams,
) -> Result<OrderParams> {
    if !(lambda_l2 >= 0.0) {
        return Err(invalid("lambda_l2", "must be >= 0"));
    }
    if !(gamma >= 0.0) {
        return Err(invalid("gamma", "must be >= 0"));
    }
    let g = gen.gram();
    let students = &theta_hat.students;
    let n = students.len();
    let coupling = if n == 2 { gamma } else { 0.0 };
    let diag: Vec<f64> = students
        .iter()
        .map(|c| lambda_l2 + coupling + c.delta_q_hat)
        .collect();
    for &d in &diag {
        if !(d > 0.0) {
            return Err(TmixError::EntropicPole { denominator: d });
        }
    }
    // inverse of A
    let inv: Vec<Vec<f64>> = match n {
        1 => vec![vec![1.0 / diag[0]]],
        2 => {
            // (a1 + g)(a2 + g) - g^2 without the cancellation at large g
            let (a1, a2) = (diag[0] - coupling, diag[1] - coupling);
            let det = a1 * a2 + coupling * (a1 + a2);
            if !(det > 0.0) {
                return Err(TmixError::EntropicPole { denominator: det });
            }
            vec![
                vec![diag[1] / det, coupling / det],
                vec![coupling / det, diag[0] / det],
            ]
        }
        _ => return Err(invalid("students", format!("{n} is not 1 or 2"))),
    };
    let fields: Vec<[f64; 3]> = students.iter().map(field).collect();
    let g_fields: Vec<[f64; 3]> = fields.iter().map(|a| mat_vec(&g, a)).collect();
    // Covariance of the sources: C_st = q^_s [s == t] + a_s' G a_t.
    let cov = |s: usize, t: usize| {
        let noise = if s == t { students[s].q_hat } else { 0.0 };
        noise + dot3(&fields[s], &g_fields[t])
    };

    let out = (0..n)
        .map(|s| {
            let proj: [f64; 3] =
                std::array::from_fn(|k| (0..n).map(|t| inv[s][t] * g_fields[t][k]).sum());
            let q: f64 = (0..n)
                .flat_map(|t| (0..n).map(move |u| (t, u)))
                .map(|(t, u)| inv[s][t] * cov(t, u) * inv[u][s])
                .sum();
            StudentOrder {
                q,
                m: proj[0],
                r_plus: proj[1],
                r_minus: proj[2],
                delta_q: inv[s][s],
                b: 0.0,
            }
        })
        .collect();
    Ok(OrderParams { students: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gen() -> GenerativeParams {
        GenerativeParams {
            m_tilde_plus: 0.3,
            m_tilde_minus: -0.25,
            q_teacher: 0.4,
            ..Default::default()
        }
    }

    fn random_conj(rng: &mut ChaCha8Rng) -> StudentConjugates {
        StudentConjugates {
            q_hat: rng.random_range(0.0..2.0),
            m_hat: rng.random_range(-1.0..1.0),
            r_hat_plus: rng.random_range(-1.0..1.0),
            r_hat_minus: rng.random_range(-1.0..1.0),
            delta_q_hat: rng.random_range(0.0..3.0),
        }
    }

    /// One student written out component by component, using the teacher
    /// identities `|v|^2 = |W_T|^2 = 1`, `v.W_T^c = m~_c`, `W_T^+.W_T^- = q_T`.
    fn single_closed_form(c: &StudentConjugates, lambda: f64, g: &GenerativeParams) -> StudentOrder {
        let den = lambda + c.delta_q_hat;
        let (mp, mm, qt) = (g.m_tilde_plus, g.m_tilde_minus, g.q_teacher);
        let (rp, rm) = (c.r_hat_plus, c.r_hat_minus);
        let shift = c.m_hat + mp * rp + mm * rm;
        let r_plus = mp * shift + (1.0 - mp * mp) * rp + (qt - mp * mm) * rm;
        let r_minus = mm * shift + (1.0 - mm * mm) * rm + (qt - mp * mm) * rp;
        let norm = c.m_hat * c.m_hat
            + rp * rp
            + rm * rm
            + 2.0 * c.m_hat * (mp * rp + mm * rm)
            + 2.0 * qt * rp * rm;
        StudentOrder {
            q: (c.q_hat + norm) / (den * den),
            m: shift / den,
            r_plus: r_plus / den,
            r_minus: r_minus / den,
            delta_q: 1.0 / den,
            b: 0.0,
        }
    }

    #[test]
    fn decoupled_pair_matches_single_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = gen();
        for _ in 0..50 {
            let conj = ConjugateParams {
                students: vec![random_conj(&mut rng), random_conj(&mut rng)],
            };
            let lambda = rng.random_range(0.01..2.0);
            let pair = entropic_updates(&conj, lambda, 0.0, &g).unwrap();
            for s in 0..2 {
                let want = single_closed_form(&conj.students[s], lambda, &g);
                assert!(pair.students[s].max_abs_diff(&want) < 1e-12);
                let alone = entropic_updates(
                    &ConjugateParams {
                        students: vec![conj.students[s]],
                    },
                    lambda,
                    0.0,
                    &g,
                )
                .unwrap();
                assert!(alone.students[0].max_abs_diff(&want) < 1e-12);
            }
        }
    }

    #[test]
    fn zero_conjugates() {
        let conj = ConjugateParams {
            students: vec![StudentConjugates::default()],
        };
        let th = entropic_updates(&conj, 0.25, 0.0, &gen()).unwrap();
        let s = th.students[0];
        assert_eq!((s.q, s.m, s.r_plus, s.r_minus), (0.0, 0.0, 0.0, 0.0));
        assert!((s.delta_q - 4.0).abs() < 1e-15);
    }

    #[test]
    fn strong_coupling_merges_students() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let conj = ConjugateParams {
            students: vec![random_conj(&mut rng), random_conj(&mut rng)],
        };
        let th = entropic_updates(&conj, 0.1, 1e10, &gen()).unwrap();
        let (a, b) = (th.students[0], th.students[1]);
        for (x, y) in [(a.q, b.q), (a.m, b.m), (a.r_plus, b.r_plus), (a.r_minus, b.r_minus)] {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn cauchy_schwarz_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = gen();
        for _ in 0..200 {
            let conj = ConjugateParams {
                students: vec![random_conj(&mut rng), random_conj(&mut rng)],
            };
            let th = entropic_updates(&conj, 0.05, rng.random_range(0.0..5.0), &g).unwrap();
            for s in &th.students {
                assert!(s.q - s.r_plus.powi(2) >= -1e-12);
                assert!(s.q - s.r_minus.powi(2) >= -1e-12);
            }
        }
    }

    #[test]
    fn pole_is_reported() {
        let conj = ConjugateParams {
            students: vec![StudentConjugates {
                delta_q_hat: -0.5,
                ..Default::default()
            }],
        };
        assert!(matches!(
            entropic_updates(&conj, 0.1, 0.0, &gen()),
            Err(TmixError::EntropicPole { .. })
        ));
    }
}
