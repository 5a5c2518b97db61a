//! Teacher geometry and finite-dimensional teacher-mixture datasets.
//!
//! Overlaps between the shift vector and the two teachers are imposed
//! exactly: three seeded Gaussian directions are orthonormalised and then
//! mixed with the Cholesky factor of the requested Gram matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TmixError};
use crate::linalg::{cholesky_psd3, dot, min_eigenvalue_sym3};
use crate::params::{invalid, GenerativeParams, Group, Overlaps};

/// Shift vector and the two teachers, each with squared norm `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherPair {
    pub w_teacher_plus: Vec<f64>,
    pub w_teacher_minus: Vec<f64>,
    pub shift_v: Vec<f64>,
    pub d: usize,
}

impl TeacherPair {
    pub fn teacher(&self, c: Group) -> &[f64] {
        match c {
            Group::Plus => &self.w_teacher_plus,
            Group::Minus => &self.w_teacher_minus,
        }
    }
}

/// `n` samples stored row-major; labels are +1/-1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub d: usize,
    pub inputs: Vec<f64>,
    pub labels: Vec<i8>,
    pub groups: Vec<Group>,
    pub meta: GenerativeParams,
    pub seed: u64,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, mu: usize) -> &[f64] {
        &self.inputs[mu * self.d..(mu + 1) * self.d]
    }

    pub fn label(&self, mu: usize) -> f64 {
        f64::from(self.labels[mu])
    }
}

/// Metadata written next to a persisted dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub generative: GenerativeParams,
    pub seed: u64,
    pub teacher_seed: Option<u64>,
}

pub fn build_teacher_geometry(gen: &GenerativeParams, d: usize, seed: u64) -> Result<TeacherPair> {
    if d < 3 {
        return Err(invalid("d", format!("{d} < 3")));
    }
    let gram = gen.gram();
    let min_eig = min_eigenvalue_sym3(&gram);
    if min_eig < -1e-12 {
        return Err(TmixError::InfeasibleGeometry {
            min_eigenvalue: min_eig,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let df = d as f64;
    // Two Gram-Schmidt passes keep the basis orthogonal to rounding error.
    for i in 0..3 {
        for _ in 0..2 {
            for j in 0..i {
                let proj = dot(&basis[i], &basis[j]) / df;
                let (head, tail) = basis.split_at_mut(i);
                for (x, e) in tail[0].iter_mut().zip(&head[j]) {
                    *x -= proj * e;
                }
            }
        }
        let scale = (df / dot(&basis[i], &basis[i])).sqrt();
        basis[i].iter_mut().for_each(|x| *x *= scale);
    }

    let l = cholesky_psd3(&gram);
    let combine = |row: usize| -> Vec<f64> {
        (0..d)
            .map(|k| (0..3).map(|j| l[row][j] * basis[j][k]).sum())
            .collect()
    };
    Ok(TeacherPair {
        shift_v: combine(0),
        w_teacher_plus: combine(1),
        w_teacher_minus: combine(2),
        d,
    })
}

pub fn sample_dataset(
    teachers: &TeacherPair,
    gen: &GenerativeParams,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("n", "must be >= 1"));
    }
    let d = teachers.d;
    let sqrt_d = (d as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = vec![0.0; n * d];
    let mut labels = Vec::with_capacity(n);
    let mut groups = Vec::with_capacity(n);
    for (mu, row) in inputs.chunks_exact_mut(d).enumerate() {
        let c = if rng.random::<f64>() < gen.rho {
            Group::Plus
        } else {
            Group::Minus
        };
        let sd = gen.delta(c).sqrt();
        let shift = c.sign() / sqrt_d;
        for (x, v) in row.iter_mut().zip(&teachers.shift_v) {
            let z: f64 = rng.sample(StandardNormal);
            *x = shift * v + sd * z;
        }
        let field = dot(teachers.teacher(c), row) / sqrt_d + gen.b_tilde(c);
        labels.push(if field >= 0.0 { 1 } else { -1 });
        groups.push(c);
        debug_assert_eq!(labels.len(), mu + 1);
    }
    Ok(Dataset {
        d,
        inputs,
        labels,
        groups,
        meta: *gen,
        seed,
    })
}

/// Overlaps of a finite-d classifier with the teacher geometry.
pub fn empirical_overlaps(w: &[f64], b: f64, teachers: &TeacherPair) -> Result<Overlaps> {
    if w.len() != teachers.d {
        return Err(TmixError::DimensionMismatch {
            expected: teachers.d,
            got: w.len(),
        });
    }
    let df = teachers.d as f64;
    Ok(Overlaps {
        q: dot(w, w) / df,
        m: dot(w, &teachers.shift_v) / df,
        r_plus: dot(w, &teachers.w_teacher_plus) / df,
        r_minus: dot(w, &teachers.w_teacher_minus) / df,
        b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_overlaps(t: &TeacherPair, gen: &GenerativeParams, tol: f64) {
        let df = t.d as f64;
        let o = |a: &[f64], b: &[f64]| dot(a, b) / df;
        assert!((o(&t.shift_v, &t.shift_v) - 1.0).abs() <= tol);
        assert!((o(&t.w_teacher_plus, &t.w_teacher_plus) - 1.0).abs() <= tol);
        assert!((o(&t.w_teacher_minus, &t.w_teacher_minus) - 1.0).abs() <= tol);
        assert!((o(&t.w_teacher_plus, &t.shift_v) - gen.m_tilde_plus).abs() <= tol);
        assert!((o(&t.w_teacher_minus, &t.shift_v) - gen.m_tilde_minus).abs() <= tol);
        assert!((o(&t.w_teacher_plus, &t.w_teacher_minus) - gen.q_teacher).abs() <= tol);
    }

    #[test]
    fn identical_teachers_orthogonal_to_shift() {
        let gen = GenerativeParams {
            m_tilde_plus: 0.0,
            m_tilde_minus: 0.0,
            q_teacher: 1.0,
            ..Default::default()
        };
        let t = build_teacher_geometry(&gen, 200, 1).unwrap();
        for (a, b) in t.w_teacher_plus.iter().zip(&t.w_teacher_minus) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(dot(&t.w_teacher_plus, &t.shift_v).abs() / 200.0 < 1e-10);
    }

    #[test]
    fn aligned_teacher_forces_overlap() {
        let gen = GenerativeParams {
            m_tilde_plus: 1.0,
            m_tilde_minus: 0.3,
            q_teacher: 0.7,
            ..Default::default()
        };
        assert!(matches!(
            build_teacher_geometry(&gen, 50, 0),
            Err(TmixError::InfeasibleGeometry { .. })
        ));
    }

    #[test]
    fn requested_overlaps_hold_at_d1000() {
        let gen = GenerativeParams {
            m_tilde_plus: 0.5,
            m_tilde_minus: 0.5,
            q_teacher: 0.8,
            ..Default::default()
        };
        let t = build_teacher_geometry(&gen, 1000, 7).unwrap();
        check_overlaps(&t, &gen, 1e-10);
    }

    #[test]
    fn labels_follow_sign_rule() {
        let gen = GenerativeParams {
            rho: 0.3,
            m_tilde_plus: 0.2,
            m_tilde_minus: -0.1,
            q_teacher: 0.4,
            b_tilde_plus: 0.3,
            b_tilde_minus: -0.2,
            ..Default::default()
        };
        let t = build_teacher_geometry(&gen, 64, 3).unwrap();
        let data = sample_dataset(&t, &gen, 500, 11).unwrap();
        let sqrt_d = 8.0;
        for mu in 0..data.n() {
            let c = data.groups[mu];
            let field = dot(t.teacher(c), data.row(mu)) / sqrt_d + gen.b_tilde(c);
            assert_eq!(data.labels[mu], if field >= 0.0 { 1 } else { -1 });
        }
    }

    #[test]
    fn group_fraction_concentrates() {
        let gen = GenerativeParams {
            rho: 0.3,
            ..Default::default()
        };
        let t = build_teacher_geometry(&gen, 3, 0).unwrap();
        let data = sample_dataset(&t, &gen, 10_000, 5).unwrap();
        let frac = data.groups.iter().filter(|&&g| g == Group::Plus).count() as f64 / 1e4;
        assert!((frac - 0.3).abs() <= 3.0 * (0.3f64 * 0.7 / 1e4).sqrt());
    }

    #[test]
    fn zero_variance_group_sits_on_its_centre() {
        let gen = GenerativeParams {
            delta_plus: 1e-300,
            ..Default::default()
        };
        let t = build_teacher_geometry(&gen, 16, 0).unwrap();
        let data = sample_dataset(&t, &gen, 50, 2).unwrap();
        for mu in 0..data.n() {
            if data.groups[mu] == Group::Plus {
                for (x, v) in data.row(mu).iter().zip(&t.shift_v) {
                    assert!((x - v / 4.0).abs() < 1e-140);
                }
            }
        }
    }

    #[test]
    fn teacher_overlaps_with_itself() {
        let gen = GenerativeParams {
            m_tilde_plus: 0.3,
            m_tilde_minus: -0.2,
            q_teacher: 0.6,
            ..Default::default()
        };
        let t = build_teacher_geometry(&gen, 300, 9).unwrap();
        let o = empirical_overlaps(&t.w_teacher_plus.clone(), 0.25, &t).unwrap();
        assert!((o.q - 1.0).abs() < 1e-10);
        assert!((o.r_plus - 1.0).abs() < 1e-10);
        assert!((o.r_minus - 0.6).abs() < 1e-10);
        assert!((o.m - 0.3).abs() < 1e-10);
        assert_eq!(o.b, 0.25);
        let zero = empirical_overlaps(&vec![0.0; 300], 0.0, &t).unwrap();
        assert_eq!(zero, Overlaps::default());
        assert!(empirical_overlaps(&[1.0; 3], 0.0, &t).is_err());
    }
}
