use crate::error::{Result, TmixError};
use crate::params::{invalid, GenerativeParams, Group, ReweighWeights};
use crate::quadrature::GaussHermite;

use super::bias::bias_solve;
use super::energetic::{cell_channel, channel_gradient, Channel};
use super::entropic::entropic_updates;
use super::{
    ConjugateParams, Derivatives, OrderParams, SaddleSolution, SolverConfig, StudentConjugates,
    StudentOrder,
};

/// `E_s = sum_cells alpha e` and its partial derivatives for one student.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StudentEnergy {
    pub value: f64,
    pub q: f64,
    pub delta_q: f64,
    pub m: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub b: f64,
}

pub fn student_energy(
    theta: &StudentOrder,
    channels: &[Channel],
    gh: &GaussHermite,
    tol: f64,
    mode: Derivatives,
) -> Result<StudentEnergy> {
    let mut out = StudentEnergy::default();
    for ch in channels {
        let g = channel_gradient(theta, ch, gh, tol, mode)?;
        let a = ch.alpha;
        out.value += a * g.value;
        out.q += a * g.q;
        out.delta_q += a * g.delta_q;
        out.m += a * g.m;
        out.b += a * g.b;
        match ch.group {
            Group::Plus => out.r_plus += a * g.r,
            Group::Minus => out.r_minus += a * g.r,
        }
    }
    Ok(out)
}

/// Conjugates as derivatives of the energetic potential:
/// `q^ = 2 dE/d delta_q`, `dq^ = -2 dE/dQ`, `m^ = dE/dm`, `R^_c = dE/dR_c`.
pub fn conjugates_from_energy(e: &StudentEnergy) -> StudentConjugates {
    StudentConjugates {
        q_hat: 2.0 * e.delta_q,
        m_hat: e.m,
        r_hat_plus: e.r_plus,
        r_hat_minus: e.r_minus,
        delta_q_hat: -2.0 * e.q,
    }
}

/// Channels seen by each student under `cfg`'s membership model.
pub fn student_channels(
    gen: &GenerativeParams,
    rw: &ReweighWeights,
    cfg: &SolverConfig,
) -> Vec<Vec<Channel>> {
    let exposure = cfg.exposure(gen);
    (0..exposure.students)
        .map(|s| {
            exposure
                .for_student(s)
                .map(|cell| cell_channel(gen, rw, cell))
                .collect()
        })
        .collect()
}

pub fn conjugate_updates(
    theta: &OrderParams,
    gen: &GenerativeParams,
    rw: &ReweighWeights,
    cfg: &SolverConfig,
    gh: &GaussHermite,
) -> Result<ConjugateParams> {
    let channels = student_channels(gen, rw, cfg);
    conjugates_with(theta, &channels, gh, cfg)
}

fn conjugates_with(
    theta: &OrderParams,
    channels: &[Vec<Channel>],
    gh: &GaussHermite,
    cfg: &SolverConfig,
) -> Result<ConjugateParams> {
    let students = theta
        .students
        .iter()
        .zip(channels)
        .map(|(st, ch)| {
            student_energy(st, ch, gh, cfg.prox_tol, cfg.derivatives)
                .map(|e| conjugates_from_energy(&e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConjugateParams { students })
}

/// One undamped sweep: conjugates at `theta`, order parameters from the
/// entropic term, then the biases.
pub fn update_sweep(
    theta: &OrderParams,
    channels: &[Vec<Channel>],
    lambda_l2: f64,
    gamma: f64,
    gen: &GenerativeParams,
    cfg: &SolverConfig,
    gh: &GaussHermite,
) -> Result<(OrderParams, ConjugateParams)> {
    let conj = conjugates_with(theta, channels, gh, cfg)?;
    let mut next = entropic_updates(&conj, lambda_l2, gamma, gen)?;
    for (st, ch) in next.students.iter_mut().zip(channels) {
        st.b = bias_solve(st, ch, gh, cfg.prox_tol)?;
    }
    Ok((next, conj))
}

/// Damped fixed-point iteration of the saddle-point equations.
pub fn fixed_point_solve(
    gen: &GenerativeParams,
    lambda_l2: f64,
    gamma: f64,
    rw: &ReweighWeights,
    cfg: &SolverConfig,
    init: Option<&OrderParams>,
) -> Result<SaddleSolution> {
    gen.validate()?;
    rw.validate()?;
    cfg.validate()?;
    if !(lambda_l2 >= 0.0 && lambda_l2.is_finite()) {
        return Err(invalid("lambda_l2", "must be finite and >= 0"));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma", "must be finite and >= 0"));
    }
    let n = cfg.students();
    let mut theta = match init {
        Some(t) if t.students.len() != n => {
            return Err(TmixError::DimensionMismatch {
                expected: n,
                got: t.students.len(),
            })
        }
        Some(t) => t.clone(),
        None => OrderParams::initial(n),
    };
    let gh = GaussHermite::new(cfg.quadrature_order);
    let channels = student_channels(gen, rw, cfg);

    let mut damping = cfg.damping;
    let mut history = Vec::new();
    let mut increases = 0;
    let mut conj = ConjugateParams {
        students: vec![StudentConjugates::default(); n],
    };
    let mut converged = false;
    for _ in 0..cfg.max_sweeps {
        let (next, c) = update_sweep(&theta, &channels, lambda_l2, gamma, gen, cfg, &gh)?;
        conj = c;
        let residual = theta.max_abs_diff(&next);
        if !residual.is_finite() {
            return Err(invalid("state", "saddle-point iteration produced non-finite values"));
        }
        if history.last().is_some_and(|&prev| residual > prev) {
            increases += 1;
            if increases >= cfg.patience {
                damping = (damping / 2.0).max(cfg.min_damping);
                increases = 0;
            }
        } else {
            increases = 0;
        }
        history.push(residual);
        if residual <= cfg.tol_residual {
            theta = next;
            converged = true;
            break;
        }
        theta.students = theta
            .students
            .iter()
            .zip(&next.students)
            .map(|(old, new)| old.mix(new, damping))
            .collect();
    }
    Ok(SaddleSolution {
        theta,
        theta_hat: conj,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
        sweeps: history.len(),
        converged,
        residual_history: history,
        gen: *gen,
        reweigh: *rw,
        lambda_l2,
        gamma,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exposure::Membership;

    fn fast_cfg() -> SolverConfig {
        SolverConfig {
            derivatives: Derivatives::Analytic,
            ..Default::default()
        }
    }

    #[test]
    fn zero_weights_give_zero_conjugates() {
        let gen = GenerativeParams::default();
        let gh = GaussHermite::new(120);
        // (w+, w1) = (1, 1) puts all weight on group +, label 1
        let rw = ReweighWeights::new(1.0, 1.0).unwrap();
        let channels = student_channels(&gen, &rw, &SolverConfig::default());
        let minus: Vec<Channel> = channels[0].iter().copied().filter(|c| c.group == Group::Minus).collect();
        assert_eq!(minus[0].weights, [0.0, 0.0]);
        for mode in [Derivatives::Analytic, Derivatives::FiniteDifference] {
            let e = student_energy(&StudentOrder::default(), &minus, &gh, 1e-12, mode).unwrap();
            assert_eq!(conjugates_from_energy(&e), StudentConjugates::default());
        }
    }

    #[test]
    fn conjugates_vanish_linearly_in_alpha() {
        let gh = GaussHermite::new(120);
        let th = OrderParams::initial(1);
        let cfg = fast_cfg();
        let rw = ReweighWeights::NEUTRAL;
        let at = |alpha: f64| {
            let gen = GenerativeParams { alpha, q_teacher: 0.5, ..Default::default() };
            conjugate_updates(&th, &gen, &rw, &cfg, &gh).unwrap().students[0]
        };
        let (a, b) = (at(1e-3), at(2e-3));
        for (x, y) in [(a.q_hat, b.q_hat), (a.m_hat, b.m_hat), (a.r_hat_plus, b.r_hat_plus), (a.delta_q_hat, b.delta_q_hat)] {
            assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        assert!(a.q_hat.abs() < 1e-2);
    }

    #[test]
    fn symmetric_solution() {
        let gen = GenerativeParams {
            q_teacher: 0.6,
            alpha: 1.0,
            ..Default::default()
        };
        let sol = fixed_point_solve(&gen, 0.1, 0.0, &ReweighWeights::NEUTRAL, &fast_cfg(), None).unwrap();
        assert!(sol.converged, "residual {}", sol.residual);
        let s = sol.student(0);
        assert!((s.r_plus - s.r_minus).abs() < 1e-8);
        assert!(s.b.abs() < 1e-8);
        assert!(s.q >= s.r_plus * s.r_plus);
    }

    #[test]
    fn heavy_regularisation_crushes_weights() {
        let gen = GenerativeParams::default();
        let sol = fixed_point_solve(&gen, 1e4, 0.0, &ReweighWeights::NEUTRAL, &fast_cfg(), None).unwrap();
        assert!(sol.converged);
        assert!(sol.student(0).q <= 1e-3);
    }

    #[test]
    fn decoupled_pair_equals_two_single_solves() {
        let gen = GenerativeParams {
            rho: 0.3,
            m_tilde_plus: 0.2,
            m_tilde_minus: 0.2,
            q_teacher: 0.5,
            alpha: 1.0,
            ..Default::default()
        };
        let cfg = SolverConfig {
            membership: Membership::coupled(1.0),
            ..fast_cfg()
        };
        let pair = fixed_point_solve(&gen, 0.1, 0.0, &ReweighWeights::NEUTRAL, &cfg, None).unwrap();
        assert!(pair.converged);
        // Each decoupled student sees one group only: re-solve it alone with
        // the same channels.
        let gh = GaussHermite::new(cfg.quadrature_order);
        let channels = student_channels(&gen, &ReweighWeights::NEUTRAL, &cfg);
        for s in 0..2 {
            let mut theta = OrderParams::initial(1);
            for _ in 0..cfg.max_sweeps {
                let (next, _) = update_sweep(&theta, &channels[s..=s], 0.1, 0.0, &gen, &cfg, &gh).unwrap();
                let r = theta.max_abs_diff(&next);
                theta.students[0] = theta.students[0].mix(&next.students[0], 0.5);
                if r <= 1e-10 {
                    break;
                }
            }
            assert!(theta.students[0].max_abs_diff(pair.student(s)) < 1e-8);
        }
    }

    #[test]
    fn residual_invariant_after_convergence() {
        let gen = GenerativeParams {
            rho: 0.2,
            m_tilde_plus: 0.3,
            m_tilde_minus: -0.1,
            q_teacher: 0.4,
            b_tilde_plus: 0.2,
            alpha: 0.8,
            ..Default::default()
        };
        let cfg = fast_cfg();
        let rw = ReweighWeights::new(0.6, 0.45).unwrap();
        let sol = fixed_point_solve(&gen, 0.1, 0.0, &rw, &cfg, None).unwrap();
        assert!(sol.converged);
        let gh = GaussHermite::new(cfg.quadrature_order);
        let channels = student_channels(&gen, &rw, &cfg);
        let (next, _) = update_sweep(&sol.theta, &channels, 0.1, 0.0, &gen, &cfg, &gh).unwrap();
        assert!(sol.theta.max_abs_diff(&next) <= 10.0 * cfg.tol_residual);
    }

    #[test]
    fn bad_init_length_is_rejected() {
        let gen = GenerativeParams::default();
        let init = OrderParams::initial(2);
        assert!(fixed_point_solve(&gen, 0.1, 0.0, &ReweighWeights::NEUTRAL, &SolverConfig::default(), Some(&init)).is_err());
    }
}
