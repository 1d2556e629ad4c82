//! Converse (lower) bounds on the minimal energy-per-bit.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::{bisect_up_set, golden_min, BoundEvaluation, BoundKind, SystemConfig, Witness};
use crate::error::{domain, Result};
use crate::quadrature::{breakpoints, integrate_with_breaks};
use crate::special_math::{alpha, h_bits, h_nats, q_inv_ln, q_inv_prob, q_lin};

const FANO_THETA_POINTS: usize = 256;

/// Left side of the Fano constraint, in bits per degree of freedom.
fn fano_lhs(theta: f64, cfg: &SystemConfig) -> f64 {
    let (k, mu, eps) = (cfg.k(), cfg.mu(), cfg.eps());
    // log2(2^k - 1) = k + log2(1 - 2^-k)
    let log2_m1 = k + (-(-k * LN_2).exp()).ln_1p() / LN_2;
    theta * cfg.s() - eps * mu * log2_m1 - mu * h_bits(eps)
}

fn fano_ptot(theta: f64, cfg: &SystemConfig) -> f64 {
    let l = fano_lhs(theta, cfg);
    if l <= 0.0 {
        return 0.0;
    }
    (l * LN_2).exp_m1() / alpha(1.0 - theta, 1.0)
}

/// Fano-type converse maximized over the misdecoded fraction `theta`.
pub fn converse_fano(cfg: &SystemConfig) -> BoundEvaluation {
    converse_fano_with(cfg, FANO_THETA_POINTS)
}

pub(crate) fn converse_fano_with(cfg: &SystemConfig, points: usize) -> BoundEvaluation {
    let (mut best_i, mut best) = (0, 0.0);
    let thetas: Vec<f64> = (1..=points).map(|i| i as f64 / points as f64).collect();
    for (i, &theta) in thetas.iter().enumerate() {
        let p = fano_ptot(theta, cfg);
        if p > best {
            best = p;
            best_i = i;
        }
    }
    if best <= 0.0 {
        return BoundEvaluation::from_ptot(BoundKind::ConverseFano, 0.0, cfg.s(), Witness::default())
            .with_flag("vacuous");
    }
    let lo = if best_i == 0 { 0.0 } else { thetas[best_i - 1] };
    let hi = thetas[(best_i + 1).min(points - 1)];
    let (t, neg) = golden_min(|t| -fano_ptot(t, cfg), lo, hi, 1e-12);
    let (theta, p) = if -neg > best { (t, -neg) } else { (thetas[best_i], best) };
    BoundEvaluation::from_ptot(
        BoundKind::ConverseFano,
        p,
        cfg.s(),
        Witness { theta: Some(theta), ..Witness::default() },
    )
}

/// `1 - E[Q(Q^-1(2^-k) - sqrt(2 x G))]`, `G ~ Exp(1)`, with `x = P_tot / mu`.
///
/// Written as `int_0^inf 2u e^{-u^2} Q(sqrt(2x) u - a) du` with `G = u^2`.
pub fn single_user_pe(x: f64, k: f64) -> f64 {
    let a = q_inv_ln(-k * LN_2);
    if x <= 0.0 {
        return q_lin(-a);
    }
    let c = (2.0 * x).sqrt();
    let pts = breakpoints(0.0, 7.0, &[a / c, (a - 3.0) / c, (a + 3.0) / c]);
    integrate_with_breaks(|u: f64| 2.0 * u * (-u * u).exp() * q_lin(c * u - a), &pts).value
}

/// Smallest `x = P_tot/mu` with `single_user_pe(x) <= eps`.
pub(crate) fn single_user_x(k: f64, eps: f64) -> f64 {
    let feasible = |x: f64| single_user_pe(x, k) <= eps;
    let mut hi = 1.0;
    while !feasible(hi) {
        hi *= 4.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi / 4.0;
    while feasible(lo) {
        lo /= 4.0;
        if lo < 1e-300 {
            return 0.0;
        }
    }
    bisect_up_set(feasible, lo, hi, 1e-13)
}

/// Single-user converse under Rayleigh fading: depends on `P_tot` only
/// through `P_tot/mu = k E`, hence not on `mu` at fixed energy-per-bit.
pub fn converse_single_user(cfg: &SystemConfig) -> BoundEvaluation {
    let x = single_user_x(cfg.k(), cfg.eps());
    BoundEvaluation::from_energy(BoundKind::ConverseSingleUser, x / cfg.k(), cfg.s(), Witness::default())
}

/// `(1/2)(Q^-1(2^-k) - Q^-1(1 - eps))^2`: the non-fading single-user
/// expression read as the total energy for `k` bits.
pub fn single_user_energy_total(k: f64, eps: f64) -> Result<f64> {
    if !(k >= 1.0) {
        return Err(domain(format!("k must be >= 1, got {k}")));
    }
    let d = q_inv_ln(-k * LN_2) - q_inv_prob(1.0 - eps)?;
    Ok(0.5 * d * d)
}

/// Energy per bit from `1/M >= Q(sqrt(2E) + Q^-1(1 - eps))`: the total
/// above divided by `k`.
pub fn single_user_energy_per_bit(k: f64, eps: f64) -> Result<f64> {
    Ok(single_user_energy_total(k, eps)? / k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IidVariant {
    Standard,
    Epi,
}

/// `(ln(1+x) - x)/r` given `x` and `x/r`, without cancellation for small `x`.
fn ln1p_minus_x_over_r(x: f64, x_over_r: f64) -> f64 {
    if x.abs() < 1e-4 {
        x_over_r * (-x / 2.0 + x * x / 3.0 - x * x * x / 4.0)
    } else {
        (x.ln_1p() - x) * (x_over_r / x)
    }
}

/// `V(r, gamma) / r`, stable as `r -> 0`.
pub(crate) fn v_over_r(r: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let sr = r.sqrt();
    let a = (gamma * (1.0 + sr) * (1.0 + sr) + 1.0).sqrt();
    let b = (gamma * (1.0 - sr) * (1.0 - sr) + 1.0).sqrt();
    let apb2 = (a + b) * (a + b);
    let f = 4.0 * gamma * gamma * r / apb2;
    let x_over_r = gamma * (1.0 - 4.0 * gamma / apb2);
    let x = r * x_over_r;
    // gamma - F (1 + gamma)/(gamma r), expanded so the O(1) terms cancel exactly.
    let tail = 2.0 * gamma * gamma * r * (1.0 + (gamma * r - 2.0 * gamma + 2.0) / (a * b + 1.0 + gamma)) / apb2;
    (gamma - f).ln_1p() + ln1p_minus_x_over_r(x, x_over_r) + tail
}

/// `V(r, gamma) = r ln(1 + gamma - F) + ln(1 + r gamma - F) - F/gamma`.
pub(crate) fn v_func(r: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let f = f_func(r, gamma);
    r * (gamma - f).ln_1p() + (r * gamma - f).ln_1p() - f / gamma
}

/// `F(r, gamma) = (sqrt(gamma (sqrt r + 1)^2 + 1) - sqrt(gamma (sqrt r - 1)^2 + 1))^2 / 4`.
pub(crate) fn f_func(r: f64, gamma: f64) -> f64 {
    let sr = r.sqrt();
    let a = (gamma * (1.0 + sr) * (1.0 + sr) + 1.0).sqrt();
    let b = (gamma * (1.0 - sr) * (1.0 - sr) + 1.0).sqrt();
    4.0 * gamma * gamma * r / ((a + b) * (a + b))
}

/// `ln(1 + gamma r (r/(r-1))^{r-1} / e)`, for `r > 1`.
pub(crate) fn v_lb(r: f64, gamma: f64) -> f64 {
    let log_factor = (r - 1.0) * (1.0 / (r - 1.0)).ln_1p() - 1.0;
    (gamma * r * log_factor.exp()).ln_1p()
}

fn iid_rhs(ptot: f64, cfg: &SystemConfig, variant: IidVariant) -> f64 {
    let mu = cfg.mu();
    let r_small = (-(mu.ln() + cfg.m().ln_m())).exp();
    // M V(1/(mu M), P) = V/r / mu
    let first = v_over_r(r_small, ptot) / mu;
    let second = match variant {
        IidVariant::Standard => v_func(1.0 / mu, ptot),
        IidVariant::Epi => v_lb(1.0 / mu, ptot),
    };
    first - second
}

const IID_SCAN_POINTS: usize = 320;
const IID_PTOT_RANGE: (f64, f64) = (1e-6, 1e15);

/// Converse for schemes whose codebooks have iid entries. Not a bound on
/// arbitrary codes; results carry the "iid-codebook-only" flag.
pub fn converse_iid(cfg: &SystemConfig, variant: IidVariant) -> Result<BoundEvaluation> {
    let kind = match variant {
        IidVariant::Standard => BoundKind::ConverseIid,
        IidVariant::Epi => BoundKind::ConverseIidEpi,
    };
    let ln_mu_m = cfg.mu().ln() + cfg.m().ln_m();
    if variant == IidVariant::Standard && !(ln_mu_m > 0.0) {
        return Err(domain("the iid converse needs mu M > 1"));
    }
    let eps = cfg.eps();
    let m = cfg.m();
    let lhs = m.ln_m() - eps * m.ln_m_minus_1() - h_nats(eps);
    let feasible = |p: f64| iid_rhs(p, cfg, variant) >= lhs;
    let (lo, hi) = IID_PTOT_RANGE;
    let grid: Vec<f64> = (0..IID_SCAN_POINTS)
        .map(|i| lo * (hi / lo).powf(i as f64 / (IID_SCAN_POINTS - 1) as f64))
        .collect();
    let rhs: Vec<f64> = grid.iter().map(|&p| iid_rhs(p, cfg, variant)).collect();
    let monotone = rhs.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs());
    let Some(first) = rhs.iter().position(|&v| v >= lhs) else {
        return Ok(BoundEvaluation::infeasible(kind).with_flag("iid-codebook-only"));
    };
    let p = if !monotone || first == 0 {
        grid[first]
    } else {
        bisect_up_set(feasible, grid[first - 1], grid[first], 1e-12)
    };
    let mut out = BoundEvaluation::from_ptot(kind, p, cfg.s(), Witness::default()).with_flag("iid-codebook-only");
    if !monotone {
        out = out.with_flag("non-monotone-scan");
    }
    Ok(out)
}

/// Pointwise maximum of the Fano and single-user converses, optionally also
/// the iid-codebook one (off by default in every front end).
pub fn combined_converse(cfg: &SystemConfig, include_iid: bool) -> BoundEvaluation {
    let mut parts = vec![converse_fano(cfg), converse_single_user(cfg)];
    if include_iid {
        if let Ok(e) = converse_iid(cfg, IidVariant::Standard) {
            parts.push(e);
        }
    }
    let mut best = parts[0].clone();
    for p in &parts[1..] {
        if p.ebno_linear > best.ebno_linear {
            best = p.clone();
        }
    }
    let active = best.kind;
    let mut out = BoundEvaluation::from_energy(
        BoundKind::Converse,
        best.ebno_linear,
        cfg.s(),
        Witness { active: Some(active), ..best.witness },
    );
    if !best.feasible {
        out = BoundEvaluation::infeasible(BoundKind::Converse);
    }
    out.flags = best.flags;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_math::ln_q;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(mu: f64, eps: f64) -> SystemConfig {
        SystemConfig::new(100.0, mu, eps).unwrap()
    }

    #[test]
    fn fano_classical_limit() {
        // Tiny eps: the theta = 1 term alone gives (2^S - 1)/S.
        let c = SystemConfig::new(100.0, 0.2, 1e-12).unwrap();
        let e = converse_fano(&c);
        let classical = (2f64.powf(c.s()) - 1.0) / c.s();
        assert!(e.ebno_linear >= classical * (1.0 - 1e-9));
    }

    #[test]
    fn fano_vacuous_region() {
        let c = cfg(1e-4, 0.5);
        assert!(fano_lhs(1e-3, &c) < 0.0);
        assert_eq!(fano_ptot(1e-3, &c), 0.0);
    }

    #[test]
    fn fano_interior_optimum_and_grid_convergence() {
        let c = cfg(0.2, 0.1);
        let e = converse_fano(&c);
        let theta = e.witness.theta.unwrap();
        assert!(theta > 0.0 && theta < 1.0, "{theta}");
        let fine = converse_fano_with(&c, 2 * FANO_THETA_POINTS);
        assert!((fine.ebno_db - e.ebno_db).abs() < 0.01);
    }

    #[test]
    fn single_user_is_mu_invariant() {
        let a = converse_single_user(&cfg(0.01, 0.1));
        let b = converse_single_user(&cfg(0.1, 0.1));
        assert!(((a.ebno_linear - b.ebno_linear) / a.ebno_linear).abs() <= 1e-9);
    }

    #[test]
    fn single_user_vanishes_at_trivial_target() {
        let k = 4.0;
        let top = 1.0 - 2f64.powf(-k);
        let near = converse_single_user(&SystemConfig::new(k, 0.1, top - 1e-9).unwrap());
        assert!(near.ebno_linear < 1e-6, "{}", near.ebno_linear);
    }

    #[test]
    fn single_user_pe_matches_monte_carlo() {
        // k = 1, and the x that makes eps = 0.3.
        let x = single_user_x(1.0, 0.3);
        let a = q_inv_ln(-LN_2);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 10_000_000;
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n {
            let g = -(1.0 - rng.random::<f64>()).ln();
            let v = ln_q((2.0 * x * g).sqrt() - a).exp();
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sum2 / n as f64 - mean * mean) / n as f64).sqrt();
        let pe = single_user_pe(x, 1.0);
        assert!((pe - 0.3).abs() < 1e-9);
        assert!((pe - mean).abs() < 3.0 * se, "{pe} vs {mean} +- {se}");
    }

    #[test]
    fn su_energy_readings() {
        let total = single_user_energy_total(100.0, 0.1).unwrap();
        let direct = 0.5 * (q_inv_ln(-100.0 * LN_2) - q_inv_prob(0.9).unwrap()).powi(2);
        assert!((total - direct).abs() < 1e-12);
        assert!((single_user_energy_per_bit(100.0, 0.1).unwrap() * 100.0 - total).abs() < 1e-12);
    }

    #[test]
    fn v_forms_agree() {
        for &(r, g) in &[(0.3, 2.0), (1e-3, 5.0), (0.9, 0.01), (2.0, 10.0), (1e-6, 100.0)] {
            let direct = v_func(r, g) / r;
            let stable = v_over_r(r, g);
            assert!((direct - stable).abs() < 1e-6 * direct.abs().max(1e-3), "r={r} g={g}: {direct} vs {stable}");
        }
        // Printed form of F.
        let (r, g) = (0.7f64, 3.0f64);
        let printed = 0.25 * ((g * (r.sqrt() + 1.0).powi(2) + 1.0).sqrt() - (g * (r.sqrt() - 1.0).powi(2) + 1.0).sqrt()).powi(2);
        assert!((f_func(r, g) - printed).abs() < 1e-14);
        assert_eq!(f_func(r, 0.0), 0.0);
        assert_eq!(v_func(r, 0.0), 0.0);
        // r -> 0: V/r -> ln(1 + gamma).
        assert!((v_over_r(1e-30, 4.0) - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn iid_zero_power_infeasible_and_rhs_monotone() {
        let c = cfg(0.1, 0.1);
        let m = c.m();
        let lhs = m.ln_m() - 0.1 * m.ln_m_minus_1() - h_nats(0.1);
        assert_eq!(iid_rhs(0.0, &c, IidVariant::Standard), 0.0);
        assert!(lhs > 0.0);
        let mut prev = f64::NEG_INFINITY;
        for i in 0..200 {
            let p = 1e-4 * 1.1f64.powi(i);
            let v = iid_rhs(p, &c, IidVariant::Standard);
            assert!(v >= prev - 1e-12 * prev.abs());
            prev = v;
        }
    }

    #[test]
    fn iid_strengthens_fano_at_high_density() {
        let c = cfg(0.25, 0.1);
        let iid = converse_iid(&c, IidVariant::Standard).unwrap();
        let fano = converse_fano(&c);
        assert!(iid.ebno_linear >= fano.ebno_linear, "{} vs {}", iid.ebno_db, fano.ebno_db);
        assert!(iid.flags.iter().any(|f| f == "iid-codebook-only"));
        assert!(converse_iid(&SystemConfig::new(2.0, 0.1, 0.1).unwrap(), IidVariant::Standard).is_err());
    }

    #[test]
    fn combined_picks_the_right_constituent() {
        let low = combined_converse(&cfg(1e-4, 0.1), false);
        assert_eq!(low.witness.active, Some(BoundKind::ConverseSingleUser));
        let high = combined_converse(&cfg(0.25, 0.1), false);
        assert_eq!(high.witness.active, Some(BoundKind::ConverseFano));
        for c in [cfg(1e-4, 0.1), cfg(0.25, 0.1)] {
            let comb = combined_converse(&c, false);
            assert!(comb.ebno_linear >= converse_fano(&c).ebno_linear);
            assert!(comb.ebno_linear >= converse_single_user(&c).ebno_linear);
            assert!(comb.witness.active != Some(BoundKind::ConverseIid));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn single_user_pe_decreasing(x in 0.01..1e4f64, f in 1.01..3.0f64, k in 1u32..=100) {
            prop_assert!(single_user_pe(x * f, k as f64) <= single_user_pe(x, k as f64) + 1e-12);
        }
    }
}
