//! Confusion matrices, accuracies and fairness scores.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TmixError};
use crate::params::{invalid, GenerativeParams, Group, Overlaps};
use crate::replica::SaddleSolution;
use crate::special::{bivariate_upper, h_tail};

/// Index 0 is label/prediction `+1`, index 1 is `-1`.
fn slot(y: f64) -> usize {
    if y > 0.0 {
        0
    } else {
        1
    }
}

/// Joint law of (true label, prediction) within one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointConfusion {
    /// `p[y][y_hat]`, index 0 for `+1` and 1 for `-1`.
    pub p: [[f64; 2]; 2],
}

impl JointConfusion {
    pub fn get(&self, y: f64, y_hat: f64) -> f64 {
        self.p[slot(y)][slot(y_hat)]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.p[0][0] + self.p[1][1]
    }

    pub fn label_prob(&self, y: f64) -> f64 {
        let r = slot(y);
        self.p[r][0] + self.p[r][1]
    }

    pub fn prediction_prob(&self, y_hat: f64) -> f64 {
        let k = slot(y_hat);
        self.p[0][k] + self.p[1][k]
    }

    /// Convex combination `sum_i w_i C_i`.
    pub fn mixture(parts: &[(f64, JointConfusion)]) -> JointConfusion {
        let mut p = [[0.0; 2]; 2];
        for (w, c) in parts {
            for (row, src) in p.iter_mut().zip(&c.p) {
                for (x, s) in row.iter_mut().zip(src) {
                    *x += w * s;
                }
            }
        }
        JointConfusion { p }
    }

    /// Normalised counts.
    pub fn from_counts(counts: [[u64; 2]; 2]) -> JointConfusion {
        let n: u64 = counts.iter().flatten().sum();
        let scale = if n == 0 { 0.0 } else { 1.0 / n as f64 };
        JointConfusion {
            p: counts.map(|row| row.map(|k| k as f64 * scale)),
        }
    }
}

/// Confusion of a classifier with overlaps `ov` on group `c`.
///
/// Teacher and student pre-activations are jointly Gaussian with correlation
/// `R_c / sqrt(Q)`; each entry is a bivariate normal orthant probability.
pub fn confusion_from_overlaps(ov: &Overlaps, gen: &GenerativeParams, c: Group) -> Result<JointConfusion> {
    let r = ov.r(c);
    let gap = ov.q - r * r;
    if ov.q < 0.0 || gap < -1e-12 || !gap.is_finite() {
        return Err(TmixError::DegenerateVariance { gap });
    }
    let delta = gen.delta(c);
    let sd = delta.sqrt();
    let mu_t = gen.teacher_mean(c);
    let mu_s = c.sign() * ov.m + ov.b;
    let mut p = [[0.0; 2]; 2];
    if ov.q <= 1e-300 {
        // Constant prediction; ties go to +1 as in the finite-size classifier.
        let y_hat = if mu_s >= 0.0 { 0 } else { 1 };
        let p_plus = h_tail(-mu_t / sd);
        p[0][y_hat] = p_plus;
        p[1][y_hat] = 1.0 - p_plus;
        return Ok(JointConfusion { p });
    }
    let sigma_s = (delta * ov.q).sqrt();
    let corr = (r / ov.q.sqrt()).clamp(-1.0, 1.0);
    for (i, y) in [1.0, -1.0].into_iter().enumerate() {
        for (j, y_hat) in [1.0, -1.0].into_iter().enumerate() {
            p[i][j] = bivariate_upper(-y * mu_t / sd, -y_hat * mu_s / sigma_s, y * y_hat * corr);
        }
    }
    Ok(JointConfusion { p })
}

/// Confusion of student `s` of a saddle solution on group `c`.
pub fn confusion_theory(sol: &SaddleSolution, s: usize, c: Group) -> Result<JointConfusion> {
    let st = sol
        .theta
        .students
        .get(s)
        .ok_or_else(|| invalid("student", format!("{s} out of range")))?;
    confusion_from_overlaps(&st.overlaps(), &sol.gen, c)
}

/// Confusion of the deployed system on group `c`: each test point is routed
/// to a student according to its assessed group.
pub fn deployed_confusion(sol: &SaddleSolution, c: Group) -> Result<JointConfusion> {
    let routing = sol.config.membership.routing();
    let parts = routing
        .iter()
        .enumerate()
        .filter(|(_, row)| row[c.index()] > 0.0)
        .map(|(s, row)| Ok((row[c.index()], confusion_theory(sol, s, c)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(JointConfusion::mixture(&parts))
}

/// Misclassification rate averaged over groups with weights `(rho, 1 - rho)`.
pub fn generalisation_error(conf: &[JointConfusion; 2], gen: &GenerativeParams) -> f64 {
    Group::BOTH
        .iter()
        .map(|&c| gen.prior(c) * (1.0 - conf[c.index()].accuracy()))
        .sum()
}

/// `P(Y = 1)` under the teacher mixture.
pub fn label_frequency(gen: &GenerativeParams) -> f64 {
    Group::BOTH
        .iter()
        .map(|&c| gen.prior(c) * h_tail(-gen.teacher_mean(c) / gen.delta(c).sqrt()))
        .sum()
}

/// Ratio of group accuracies; `+inf` when group `-` is never right.
pub fn disparate_impact(plus: &JointConfusion, minus: &JointConfusion) -> f64 {
    let den = minus.accuracy();
    if den <= 0.0 {
        f64::INFINITY
    } else {
        plus.accuracy() / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairnessCriterion {
    /// `I(Y_hat; C)`
    StatisticalParity,
    /// `I(Y_hat; C | Y = 1)`
    EqualOpportunity,
    /// `I(1[Y_hat = Y]; C)`
    EqualAccuracy,
    /// `I(Y_hat; C | Y)`
    EqualOdds,
    /// `I(1[Y = 1]; C | Y_hat = 1)`
    PredictedParity1,
    /// `I(Y; C | Y_hat)`
    PredictedParity10,
}

impl FairnessCriterion {
    pub const ALL: [FairnessCriterion; 6] = [
        FairnessCriterion::StatisticalParity,
        FairnessCriterion::EqualOpportunity,
        FairnessCriterion::EqualAccuracy,
        FairnessCriterion::EqualOdds,
        FairnessCriterion::PredictedParity1,
        FairnessCriterion::PredictedParity10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FairnessCriterion::StatisticalParity => "statistical_parity",
            FairnessCriterion::EqualOpportunity => "equal_opportunity",
            FairnessCriterion::EqualAccuracy => "equal_accuracy",
            FairnessCriterion::EqualOdds => "equal_odds",
            FairnessCriterion::PredictedParity1 => "predicted_parity_1",
            FairnessCriterion::PredictedParity10 => "predicted_parity_10",
        }
    }

    /// Short column suffix used in CSV output.
    pub fn short(self) -> &'static str {
        match self {
            FairnessCriterion::StatisticalParity => "sp",
            FairnessCriterion::EqualOpportunity => "eo",
            FairnessCriterion::EqualAccuracy => "ea",
            FairnessCriterion::EqualOdds => "eodds",
            FairnessCriterion::PredictedParity1 => "pp1",
            FairnessCriterion::PredictedParity10 => "pp10",
        }
    }
}

impl fmt::Display for FairnessCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FairnessCriterion {
    type Err = TmixError;

    fn from_str(s: &str) -> Result<Self> {
        FairnessCriterion::ALL
            .into_iter()
            .find(|c| c.name() == s || c.short() == s)
            .ok_or_else(|| invalid("criterion", format!("unknown criterion `{s}`")))
    }
}

fn xlogx_ratio(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * (p / q).ln()
    }
}

/// `I(A; C)` from an unnormalised table `t[c][a]`; returns 0 for an empty table.
fn mi_table<const K: usize>(t: &[[f64; K]; 2]) -> f64 {
    let total: f64 = t.iter().flatten().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let pc: [f64; 2] = std::array::from_fn(|c| t[c].iter().sum::<f64>() / total);
    let pa: [f64; K] = std::array::from_fn(|a| (t[0][a] + t[1][a]) / total);
    let mut mi = 0.0;
    for c in 0..2 {
        for a in 0..K {
            let p = t[c][a] / total;
            mi += xlogx_ratio(p, pc[c] * pa[a]);
        }
    }
    mi.max(0.0)
}

/// Mutual information (nats) between the group and the event of `criterion`.
pub fn mutual_information(
    criterion: FairnessCriterion,
    plus: &JointConfusion,
    minus: &JointConfusion,
    rho: f64,
) -> f64 {
    // joint[c][y][y_hat] = P(C = c, Y = y, Y_hat = y_hat)
    let joint: [[[f64; 2]; 2]; 2] = [
        plus.p.map(|row| row.map(|v| rho * v)),
        minus.p.map(|row| row.map(|v| (1.0 - rho) * v)),
    ];
    let given_label = |y: usize| -> [[f64; 2]; 2] { [joint[0][y], joint[1][y]] };
    let given_pred = |k: usize| -> [[f64; 2]; 2] { [[joint[0][0][k], joint[0][1][k]], [joint[1][0][k], joint[1][1][k]]] };
    let mass = |t: &[[f64; 2]; 2]| -> f64 { t.iter().flatten().sum() };
    match criterion {
        FairnessCriterion::StatisticalParity => mi_table(&joint.map(|g| [g[0][0] + g[1][0], g[0][1] + g[1][1]])),
        FairnessCriterion::EqualOpportunity => mi_table(&given_label(0)),
        FairnessCriterion::EqualAccuracy => mi_table(&joint.map(|g| [g[0][0] + g[1][1], g[0][1] + g[1][0]])),
        FairnessCriterion::EqualOdds => (0..2)
            .map(|y| {
                let t = given_label(y);
                mass(&t) * mi_table(&t)
            })
            .sum(),
        FairnessCriterion::PredictedParity1 => mi_table(&given_pred(0)),
        FairnessCriterion::PredictedParity10 => (0..2)
            .map(|k| {
                let t = given_pred(k);
                mass(&t) * mi_table(&t)
            })
            .sum(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub acc_plus: f64,
    pub acc_minus: f64,
    pub disparate_impact: f64,
    pub generalisation_error: f64,
    pub confusion_plus: JointConfusion,
    pub confusion_minus: JointConfusion,
    /// Nats.
    pub mi: BTreeMap<FairnessCriterion, f64>,
}

impl FairnessReport {
    pub fn from_confusions(plus: JointConfusion, minus: JointConfusion, gen: &GenerativeParams) -> Self {
        let mi = FairnessCriterion::ALL
            .into_iter()
            .map(|c| (c, mutual_information(c, &plus, &minus, gen.rho)))
            .collect();
        Self {
            acc_plus: plus.accuracy(),
            acc_minus: minus.accuracy(),
            disparate_impact: disparate_impact(&plus, &minus),
            generalisation_error: generalisation_error(&[plus, minus], gen),
            confusion_plus: plus,
            confusion_minus: minus,
            mi,
        }
    }

    pub fn mi(&self, c: FairnessCriterion) -> f64 {
        self.mi[&c]
    }
}

/// Report for student `s` of a solution, evaluated on both groups.
pub fn fairness_report(sol: &SaddleSolution, s: usize) -> Result<FairnessReport> {
    Ok(FairnessReport::from_confusions(
        confusion_theory(sol, s, Group::Plus)?,
        confusion_theory(sol, s, Group::Minus)?,
        &sol.gen,
    ))
}

/// Report for the deployed system (routing by assessed group).
pub fn deployed_report(sol: &SaddleSolution) -> Result<FairnessReport> {
    Ok(FairnessReport::from_confusions(
        deployed_confusion(sol, Group::Plus)?,
        deployed_confusion(sol, Group::Minus)?,
        &sol.gen,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_pdf;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn conf(p: [[f64; 2]; 2]) -> JointConfusion {
        JointConfusion { p }
    }

    /// `P(y, y_hat | c)` by 1-D Simpson over the teacher noise, split at the
    /// point where the label flips.
    fn confusion_oracle(ov: &Overlaps, gen: &GenerativeParams, c: Group) -> [[f64; 2]; 2] {
        let sd = gen.delta(c).sqrt();
        let mu_t = gen.teacher_mean(c);
        let mu_s = c.sign() * ov.m + ov.b;
        let corr = ov.r(c) / ov.q.sqrt();
        let s = (1.0 - corr * corr).sqrt();
        let cut = -mu_t / sd;
        let simpson = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| {
            let n = 20_000;
            let h = (b - a) / n as f64;
            let mut acc = f(a) + f(b);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
            }
            acc * h / 3.0
        };
        let mut out = [[0.0; 2]; 2];
        for (i, y) in [1.0, -1.0].into_iter().enumerate() {
            let (a, b) = if y > 0.0 { (cut.max(-12.0), 12.0) } else { (-12.0, cut.min(12.0)) };
            for (j, yh) in [1.0, -1.0].into_iter().enumerate() {
                let f = |xi: f64| {
                    let cond_mean = mu_s / (sd * ov.q.sqrt()) + corr * xi;
                    normal_pdf(xi) * h_tail(-yh * cond_mean / s)
                };
                out[i][j] = if a < b { simpson(a, b, &f) } else { 0.0 };
            }
        }
        out
    }

    #[test]
    fn independent_coins() {
        let ov = Overlaps { q: 1.0, ..Default::default() };
        let c = confusion_from_overlaps(&ov, &GenerativeParams::default(), Group::Plus).unwrap();
        for row in c.p {
            for v in row {
                assert!((v - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn closed_form_matches_quadrature_oracle() {
        let gen = GenerativeParams {
            delta_plus: 0.4,
            delta_minus: 1.7,
            m_tilde_plus: 0.3,
            m_tilde_minus: -0.2,
            q_teacher: 0.5,
            b_tilde_plus: 0.3,
            b_tilde_minus: -0.6,
            ..Default::default()
        };
        let ov = Overlaps { q: 1.3, m: 0.2, r_plus: 0.7, r_minus: -0.4, b: 0.15 };
        for c in Group::BOTH {
            let got = confusion_from_overlaps(&ov, &gen, c).unwrap();
            let want = confusion_oracle(&ov, &gen, c);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((got.p[i][j] - want[i][j]).abs() < 1e-10, "{c:?} {i}{j}");
                }
            }
            assert!((got.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_norm_predicts_constant() {
        let gen = GenerativeParams { b_tilde_plus: 0.4, ..Default::default() };
        let ov = Overlaps { b: 0.5, ..Default::default() };
        let c = confusion_from_overlaps(&ov, &gen, Group::Plus).unwrap();
        assert_eq!(c.prediction_prob(-1.0), 0.0);
        assert!((c.label_prob(1.0) - h_tail(-0.4 / 0.5f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn generalisation_error_limits() {
        let g = GenerativeParams { rho: 0.3, ..Default::default() };
        let diag = conf([[0.4, 0.0], [0.0, 0.6]]);
        assert_eq!(generalisation_error(&[diag, diag], &g), 0.0);
        let flat = conf([[0.25; 2]; 2]);
        assert!((generalisation_error(&[flat, flat], &g) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn label_frequency_limits_and_sampling() {
        assert!((label_frequency(&GenerativeParams::default()) - 0.5).abs() < 1e-15);
        let big = GenerativeParams { b_tilde_plus: 40.0, b_tilde_minus: 40.0, ..Default::default() };
        assert!((label_frequency(&big) - 1.0).abs() < 1e-15);

        let gen = GenerativeParams {
            rho: 0.3,
            m_tilde_plus: 0.2,
            b_tilde_plus: 0.5,
            delta_plus: 0.5,
            m_tilde_minus: 0.1,
            b_tilde_minus: 0.0,
            delta_minus: 2.0,
            ..Default::default()
        };
        let p = label_frequency(&gen);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 1_000_000;
        let mut ones = 0u64;
        for _ in 0..n {
            let c = if rng.random::<f64>() < gen.rho { Group::Plus } else { Group::Minus };
            let xi: f64 = rng.sample(StandardNormal);
            if gen.teacher_mean(c) + gen.delta(c).sqrt() * xi >= 0.0 {
                ones += 1;
            }
        }
        let freq = ones as f64 / n as f64;
        assert!((freq - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn disparate_impact_cases() {
        let a = conf([[0.5, 0.1], [0.1, 0.3]]);
        assert_eq!(disparate_impact(&a, &a), 1.0);
        let p72 = conf([[0.36, 0.14], [0.14, 0.36]]);
        let p90 = conf([[0.45, 0.05], [0.05, 0.45]]);
        assert!((disparate_impact(&p72, &p90) - 0.8).abs() < 1e-15);
        assert!((disparate_impact(&p90, &p72) - 1.0 / 0.8).abs() < 1e-15);
        let never = conf([[0.0, 0.5], [0.5, 0.0]]);
        assert_eq!(disparate_impact(&a, &never), f64::INFINITY);
    }

    #[test]
    fn prediction_equal_to_group_saturates_parity() {
        let plus = conf([[0.3, 0.0], [0.7, 0.0]]);
        let minus = conf([[0.0, 0.6], [0.0, 0.4]]);
        let rho: f64 = 0.3;
        let h = -rho * rho.ln() - (1.0 - rho) * (1.0 - rho).ln();
        let mi = mutual_information(FairnessCriterion::StatisticalParity, &plus, &minus, rho);
        assert!((mi - h).abs() < 1e-14);
    }

    /// Entropy oracle: I(A;C|B) = H(A,B) + H(C,B) - H(A,C,B) - H(B), built from
    /// the raw (c, y, y_hat) table with explicit event maps.
    fn entropy(ps: &[f64]) -> f64 {
        ps.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum()
    }

    fn oracle(
        plus: &JointConfusion,
        minus: &JointConfusion,
        rho: f64,
        event: fn(usize, usize) -> usize,
        cond: fn(usize, usize) -> usize,
        only: Option<usize>,
    ) -> f64 {
        use std::collections::HashMap;
        let mut abc: HashMap<(usize, usize, usize), f64> = HashMap::new();
        for (c, conf, w) in [(0, plus, rho), (1, minus, 1.0 - rho)] {
            for y in 0..2 {
                for k in 0..2 {
                    let b = cond(y, k);
                    if only.is_some_and(|o| o != b) {
                        continue;
                    }
                    *abc.entry((event(y, k), c, b)).or_default() += w * conf.p[y][k];
                }
            }
        }
        let total: f64 = abc.values().sum();
        let marg = |f: &dyn Fn(&(usize, usize, usize)) -> (usize, usize)| {
            let mut m: HashMap<(usize, usize), f64> = HashMap::new();
            for (key, v) in &abc {
                *m.entry(f(key)).or_default() += v / total;
            }
            m.into_values().collect::<Vec<_>>()
        };
        let h_ab = entropy(&marg(&|k| (k.0, k.2)));
        let h_cb = entropy(&marg(&|k| (k.1, k.2)));
        let h_b = entropy(&marg(&|k| (k.2, 0)));
        let h_abc = entropy(&abc.values().map(|v| v / total).collect::<Vec<_>>());
        h_ab + h_cb - h_abc - h_b
    }

    fn random_conf(rng: &mut ChaCha8Rng) -> JointConfusion {
        let raw: [f64; 4] = std::array::from_fn(|_| rng.random_range(0.01..1.0));
        let s: f64 = raw.iter().sum();
        conf([[raw[0] / s, raw[1] / s], [raw[2] / s, raw[3] / s]])
    }

    #[test]
    fn mutual_information_matches_entropy_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (p, m) = (random_conf(&mut rng), random_conf(&mut rng));
            let rho = rng.random_range(0.05..0.95);
            let none = |_: usize, _: usize| 0;
            let checks: [(FairnessCriterion, f64); 6] = [
                (FairnessCriterion::StatisticalParity, oracle(&p, &m, rho, |_, k| k, none, None)),
                (FairnessCriterion::EqualOpportunity, oracle(&p, &m, rho, |_, k| k, |y, _| y, Some(0))),
                (FairnessCriterion::EqualAccuracy, oracle(&p, &m, rho, |y, k| usize::from(y == k), none, None)),
                (FairnessCriterion::EqualOdds, oracle(&p, &m, rho, |_, k| k, |y, _| y, None)),
                (FairnessCriterion::PredictedParity1, oracle(&p, &m, rho, |y, _| y, |_, k| k, Some(0))),
                (FairnessCriterion::PredictedParity10, oracle(&p, &m, rho, |y, _| y, |_, k| k, None)),
            ];
            for (crit, want) in checks {
                let got = mutual_information(crit, &p, &m, rho);
                assert!((got - want).abs() < 1e-12, "{crit}: {got} vs {want}");
            }
        }
    }

    proptest! {
        #[test]
        fn mi_nonnegative_and_zero_for_equal_groups(seed in any::<u64>(), rho in 0.01..0.99f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (p, m) = (random_conf(&mut rng), random_conf(&mut rng));
            for crit in FairnessCriterion::ALL {
                prop_assert!(mutual_information(crit, &p, &m, rho) >= 0.0);
                prop_assert!(mutual_information(crit, &p, &p, rho).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn criterion_names_roundtrip() {
        for c in FairnessCriterion::ALL {
            assert_eq!(c.name().parse::<FairnessCriterion>().unwrap(), c);
            assert_eq!(c.short().parse::<FairnessCriterion>().unwrap(), c);
        }
        assert!("nope".parse::<FairnessCriterion>().is_err());
    }
}
