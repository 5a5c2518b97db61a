//! Energetic term of one exposure cell.
//!
//! For a student with overlaps `(Q, m, R_c, delta_q, b)` seeing samples of
//! true group `c`:
//!
//! `e = sum_y int Dz H(-y (mu/sqrt(Delta) + r z) / sqrt(1 - r^2)) M(y, omega(z))`
//!
//! with `mu = c m~_c + b~_c`, `r = R_c / sqrt(Q)`, `omega = c m + b +
//! sqrt(Delta Q) z` and `M` the proximal value at scale `sqrt(Delta delta_q)`.

use crate::error::{Result, TmixError};
use crate::exposure::ExposureCell;
use crate::params::{GenerativeParams, Group, ReweighWeights};
use crate::quadrature::GaussHermite;
use crate::special::{h_tail, normal_pdf, sigmoid};

use super::proximal::proximal;
use super::{Derivatives, StudentOrder};

/// Gaussian channel seen by one student: a true group, its loss weights and
/// the fraction of the training set it contributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub group: Group,
    pub delta: f64,
    pub teacher_mean: f64,
    /// Loss weight for label `+1` and `-1`.
    pub weights: [f64; 2],
    pub alpha: f64,
}

pub fn cell_channel(gen: &GenerativeParams, rw: &ReweighWeights, cell: &ExposureCell) -> Channel {
    let c = cell.true_group;
    Channel {
        group: c,
        delta: gen.delta(c),
        teacher_mean: gen.teacher_mean(c),
        weights: [
            rw.weight(cell.believed_group, 1.0),
            rw.weight(cell.believed_group, -1.0),
        ],
        alpha: cell.alpha,
    }
}

/// `e` and its partial derivatives (without the `alpha` prefactor).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelGradient {
    pub value: f64,
    pub q: f64,
    pub delta_q: f64,
    pub m: f64,
    /// Derivative with respect to `R_c` of the channel's own group.
    pub r: f64,
    pub b: f64,
}

struct Geometry {
    sqrt_q: f64,
    corr: f64,
    s2: f64,
    degenerate: bool,
    sd: f64,
    mu_over_sd: f64,
    scale: f64,
}

const DEGENERATE_GAP: f64 = 1e-14;

fn geometry(st: &StudentOrder, ch: &Channel) -> Geometry {
    let q = st.q.max(0.0);
    let sqrt_q = q.sqrt();
    let corr = if sqrt_q > 0.0 {
        (st.r(ch.group) / sqrt_q).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let s2 = 1.0 - corr * corr;
    let sd = ch.delta.sqrt();
    Geometry {
        sqrt_q,
        corr,
        s2,
        degenerate: s2 <= DEGENERATE_GAP,
        sd,
        mu_over_sd: ch.teacher_mean / sd,
        scale: (ch.delta * st.delta_q).sqrt(),
    }
}

fn check_gap(st: &StudentOrder, c: Group) -> Result<()> {
    let gap = st.q - st.r(c).powi(2);
    if st.q < 0.0 || gap < -1e-12 || !gap.is_finite() {
        return Err(TmixError::DegenerateVariance { gap });
    }
    Ok(())
}

/// Probability under the teacher that the label is `y`, given node `z`.
fn label_prob(geo: &Geometry, y: f64, z: f64) -> f64 {
    let t = y * (geo.mu_over_sd + geo.corr * z);
    if geo.degenerate {
        if t > 0.0 {
            1.0
        } else if t < 0.0 {
            0.0
        } else {
            0.5
        }
    } else {
        h_tail(-t / geo.s2.sqrt())
    }
}

fn value_unchecked(st: &StudentOrder, ch: &Channel, gh: &GaussHermite, tol: f64) -> f64 {
    let geo = geometry(st, ch);
    let c = ch.group.sign();
    let base = c * st.m + st.b;
    let mut acc = 0.0;
    for (&z, &w) in gh.nodes.iter().zip(&gh.weights) {
        let omega = base + geo.sd * geo.sqrt_q * z;
        for (y, weight) in [(1.0, ch.weights[0]), (-1.0, ch.weights[1])] {
            if weight == 0.0 {
                continue;
            }
            let h = label_prob(&geo, y, z);
            if h == 0.0 {
                continue;
            }
            acc += w * h * proximal(y, omega, geo.scale, weight, tol).value;
        }
    }
    acc
}

/// Energetic value of one channel.
pub fn channel_value(st: &StudentOrder, ch: &Channel, gh: &GaussHermite, tol: f64) -> Result<f64> {
    check_gap(st, ch.group)?;
    Ok(value_unchecked(st, ch, gh, tol))
}

/// `e(Theta; Delta_c)` for student `theta` on group `c`, weighted by `W(c, y)`.
pub fn energetic_term(
    theta: &StudentOrder,
    gen: &GenerativeParams,
    rw: &ReweighWeights,
    c: Group,
    gh: &GaussHermite,
    tol: f64,
) -> Result<f64> {
    let ch = cell_channel(
        gen,
        rw,
        &ExposureCell {
            student: 0,
            true_group: c,
            believed_group: c,
            alpha: 1.0,
        },
    );
    channel_value(theta, &ch, gh, tol)
}

pub fn channel_gradient(
    st: &StudentOrder,
    ch: &Channel,
    gh: &GaussHermite,
    tol: f64,
    mode: Derivatives,
) -> Result<ChannelGradient> {
    check_gap(st, ch.group)?;
    let geo = geometry(st, ch);
    match mode {
        Derivatives::Analytic if st.q > 1e-12 && !geo.degenerate => {
            Ok(analytic(st, ch, &geo, gh, tol))
        }
        _ => Ok(finite_difference(st, ch, gh, tol)),
    }
}

fn analytic(
    st: &StudentOrder,
    ch: &Channel,
    geo: &Geometry,
    gh: &GaussHermite,
    tol: f64,
) -> ChannelGradient {
    let c = ch.group.sign();
    let base = c * st.m + st.b;
    let s32 = geo.s2 * geo.s2.sqrt();
    let dr_dq = -geo.corr / (2.0 * st.q);
    let dr_dr = 1.0 / geo.sqrt_q;
    let mut g = ChannelGradient::default();
    for (&z, &w) in gh.nodes.iter().zip(&gh.weights) {
        let omega = base + geo.sd * geo.sqrt_q * z;
        let domega_dq = geo.sd * z / (2.0 * geo.sqrt_q);
        for (y, weight) in [(1.0, ch.weights[0]), (-1.0, ch.weights[1])] {
            if weight == 0.0 {
                continue;
            }
            let t = geo.mu_over_sd + geo.corr * z;
            let arg = -y * t / geo.s2.sqrt();
            let h = h_tail(arg);
            // dH/dcorr
            let dh = normal_pdf(arg) * y * (z + geo.corr * geo.mu_over_sd) / s32;
            let p = proximal(y, omega, geo.scale, weight, tol);
            let m_omega = weight * y * sigmoid(-y * (omega + geo.scale * p.lambda));
            g.value += w * h * p.value;
            g.q += w * (dh * dr_dq * p.value + h * m_omega * domega_dq);
            g.r += w * dh * dr_dr * p.value;
            g.m += w * h * m_omega * c;
            g.b += w * h * m_omega;
            g.delta_q += w * h * p.lambda * p.lambda / (2.0 * st.delta_q);
        }
    }
    g
}

/// `d e / d b` of one channel (analytic; cheap and exact at the nodes).
pub(crate) fn channel_bias_derivative(
    st: &StudentOrder,
    ch: &Channel,
    gh: &GaussHermite,
    tol: f64,
) -> f64 {
    let geo = geometry(st, ch);
    let base = ch.group.sign() * st.m + st.b;
    let mut acc = 0.0;
    for (&z, &w) in gh.nodes.iter().zip(&gh.weights) {
        let omega = base + geo.sd * geo.sqrt_q * z;
        for (y, weight) in [(1.0, ch.weights[0]), (-1.0, ch.weights[1])] {
            if weight == 0.0 {
                continue;
            }
            let h = label_prob(&geo, y, z);
            if h == 0.0 {
                continue;
            }
            let p = proximal(y, omega, geo.scale, weight, tol);
            acc += w * h * weight * y * sigmoid(-y * (omega + geo.scale * p.lambda));
        }
    }
    acc
}

fn finite_difference(
    st: &StudentOrder,
    ch: &Channel,
    gh: &GaussHermite,
    tol: f64,
) -> ChannelGradient {
    // Parameter slots: q, m, r_plus, r_minus, delta_q, b.
    let f = |s: &StudentOrder| value_unchecked(s, ch, gh, tol);
    let base = st.as_array();
    let probe = |idx: usize, h: f64| {
        let mut a = base;
        a[idx] += h;
        f(&StudentOrder::from_array(a))
    };
    let derivative = |idx: usize, positive: bool| {
        let p = base[idx];
        let h = 1e-5 * p.abs().max(1.0);
        if !positive || p > 2.0 * h {
            (probe(idx, h) - probe(idx, -h)) / (2.0 * h)
        } else if p > 0.0 {
            // keep the lower probe inside the domain
            (probe(idx, 0.5 * p) - probe(idx, -0.5 * p)) / p
        } else {
            (probe(idx, h) - f(st)) / h
        }
    };
    let r_slot = match ch.group {
        Group::Plus => 2,
        Group::Minus => 3,
    };
    ChannelGradient {
        value: f(st),
        q: derivative(0, true),
        m: derivative(1, false),
        r: derivative(r_slot, false),
        delta_q: derivative(4, true),
        b: derivative(5, false),
    }
}
