//! Achievability without channel state information: random Gaussian
//! codebooks with subspace-projection decoding of a `nu` fraction of users.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{nu_grid, theta_grid, BoundEvaluation, BoundKind, GridPolicy, SystemConfig, Witness};
use crate::error::{domain, Result};
use crate::special_math::{alpha, h_nats};

/// Every value of the chain that leads to `P_tot,nu(theta, xi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoCsiIntermediates {
    pub nu: f64,
    pub eps_prime: f64,
    pub theta: f64,
    pub xi: f64,
    pub v_tilde: f64,
    pub v_theta: f64,
    pub delta_star: f64,
    pub c_theta: f64,
    pub q_theta: f64,
    pub delta1_star: f64,
    pub delta2_star: f64,
    pub f: f64,
    pub f_hat: f64,
    pub feasible: bool,
}

/// `-ln(1 - x) - x`, by its series near 0 where the direct form cancels.
fn neg_ln1m_minus_x(x: f64) -> f64 {
    if x < 1e-2 {
        let mut term = x;
        let mut sum = 0.0;
        for j in 2..=10 {
            term *= x;
            sum += term / j as f64;
        }
        sum
    } else {
        -(-x).ln_1p() - x
    }
}

/// Smallest `x` in (0, 1) with `-ln(1 - x) - x >= q`.
pub(crate) fn delta2_root(q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let g = |x: f64| neg_ln1m_minus_x(x) - q;
    // g is increasing on (0,1) from -q to +inf.
    let mut lo = 0.0;
    let mut hi = 1.0 - (-(q + 2.0)).exp() * 1e-3;
    while g(hi) < 0.0 {
        hi = 1.0 - (1.0 - hi) * 1e-3;
    }
    // Small q: x ~ sqrt(2q) is an excellent start for Newton.
    let mut x = (2.0 * q).sqrt().min(0.5 * (lo + hi));
    for _ in 0..200 {
        let gx = g(x);
        if gx == 0.0 {
            return x;
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - gx * (1.0 - x) / x;
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    x
}

/// The part of the chain that does not depend on `xi`.
#[derive(Debug, Clone, Copy)]
struct ThetaChain {
    v_tilde: f64,
    v_theta: f64,
    delta_star: f64,
    c_theta: f64,
    q_theta: f64,
    delta1_star: f64,
    delta2_star: f64,
    f: f64,
}

fn theta_chain(nu: f64, theta: f64, cfg: &SystemConfig) -> ThetaChain {
    let mu = cfg.mu();
    let ln_m = cfg.m().ln_m();
    let dec = 1.0 - nu * (1.0 - theta);
    let h_dec = h_nats(dec);
    let delta_star = mu * h_dec / (1.0 - mu * nu);
    let v_tilde = delta_star
        + theta * mu * nu * ln_m / (1.0 - mu * nu)
        + (1.0 - mu * nu * (1.0 - theta)) / (1.0 - mu * nu) * h_nats(theta * mu * nu / (1.0 - mu * nu * (1.0 - theta)))
        + mu * dec / (1.0 - mu * nu) * h_nats(theta * nu / dec);
    let v_theta = (-v_tilde).exp();
    // c = 2V/(1-V) = 2/(e^Vt - 1)
    let c_theta = 2.0 / v_tilde.exp_m1();
    let q_theta = mu * h_dec / (1.0 - mu * nu * (1.0 - theta));
    let delta1_star = q_theta * (1.0 + c_theta)
        + (q_theta * q_theta * (c_theta * c_theta + 2.0 * c_theta) + 2.0 * q_theta * (1.0 + c_theta)).sqrt();
    let delta2_star = delta2_root(q_theta);
    // ((1 + d1 (1 - V))/V - 1) = (1 + d1)(1 - V)/V = (1 + d1)(e^Vt - 1)
    let f = (1.0 + delta1_star) * v_tilde.exp_m1() / (1.0 - delta2_star);
    ThetaChain { v_tilde, v_theta, delta_star, c_theta, q_theta, delta1_star, delta2_star, f }
}

fn chain_ok(ch: &ThetaChain) -> bool {
    ch.v_tilde > 0.0 && ch.v_theta > 0.0 && ch.v_theta < 1.0 && ch.f.is_finite() && ch.delta2_star < 1.0
}

/// `P_tot` from a precomputed chain; `+inf` when infeasible.
fn ptot_from_chain(ch: &ThetaChain, nu: f64, theta: f64, xi: f64) -> (f64, f64) {
    if !chain_ok(ch) {
        return (f64::INFINITY, f64::NAN);
    }
    let f_hat = ch.f / alpha(xi, xi + nu * theta);
    let denom = 1.0 - f_hat * alpha(xi + nu * theta, xi + 1.0 - nu * (1.0 - theta));
    if !(denom > 0.0) || !f_hat.is_finite() {
        return (f64::INFINITY, f_hat);
    }
    (f_hat / denom, f_hat)
}

/// `P_tot,nu(theta, xi)` together with every intermediate value.
pub fn nocsi_ptot(nu: f64, theta: f64, xi: f64, cfg: &SystemConfig) -> Result<(f64, NoCsiIntermediates)> {
    let eps = cfg.eps();
    if !(nu > 1.0 - eps && nu <= 1.0) {
        return Err(domain(format!("nu must lie in (1 - eps, 1], got {nu}")));
    }
    let eps_prime = eps - (1.0 - nu);
    if !(theta > eps_prime / nu && theta <= 1.0) {
        return Err(domain(format!("theta must lie in (eps'/nu, 1] = ({}, 1], got {theta}", eps_prime / nu)));
    }
    if !(xi >= 0.0 && xi <= nu * (1.0 - theta) * (1.0 + 1e-12)) {
        return Err(domain(format!("xi must lie in [0, nu(1 - theta)], got {xi}")));
    }
    let ch = theta_chain(nu, theta, cfg);
    let (p, f_hat) = ptot_from_chain(&ch, nu, theta, xi);
    let inter = NoCsiIntermediates {
        nu,
        eps_prime,
        theta,
        xi,
        v_tilde: ch.v_tilde,
        v_theta: ch.v_theta,
        delta_star: ch.delta_star,
        c_theta: ch.c_theta,
        q_theta: ch.q_theta,
        delta1_star: ch.delta1_star,
        delta2_star: ch.delta2_star,
        f: ch.f,
        f_hat,
        feasible: p.is_finite(),
    };
    Ok((p, inter))
}

fn xi_grid(nu: f64, theta: f64, points: usize) -> Vec<f64> {
    let top = (nu * (1.0 - theta)).max(0.0);
    if top == 0.0 {
        return vec![0.0];
    }
    (0..points).map(|j| top * j as f64 / (points - 1) as f64).collect()
}

struct SupResult {
    ptot: f64,
    theta: f64,
    xi: f64,
}

/// `sup_{theta, xi} P_tot,nu`, or `None` if any grid point is infeasible.
fn sup_for_nu(nu: f64, cfg: &SystemConfig, grid: &GridPolicy) -> Option<SupResult> {
    let eps_prime = cfg.eps() - (1.0 - nu);
    let thetas = theta_grid(eps_prime / nu, grid.theta);
    let mut best = SupResult { ptot: f64::NEG_INFINITY, theta: f64::NAN, xi: f64::NAN };
    let mut best_i = 0;
    let scan = |theta: f64, xis: &[f64], best: &mut SupResult| -> bool {
        let ch = theta_chain(nu, theta, cfg);
        for &xi in xis {
            let (p, _) = ptot_from_chain(&ch, nu, theta, xi);
            if !p.is_finite() {
                return false;
            }
            if p > best.ptot {
                *best = SupResult { ptot: p, theta, xi };
            }
        }
        true
    };
    for (i, &theta) in thetas.iter().enumerate() {
        let before = best.ptot;
        if !scan(theta, &xi_grid(nu, theta, grid.xi), &mut best) {
            return None;
        }
        if best.ptot > before {
            best_i = i;
        }
    }
    // Local refinement around the incumbent.
    let lo = if best_i == 0 { eps_prime / nu } else { thetas[best_i - 1] };
    let hi = thetas[(best_i + 1).min(thetas.len() - 1)];
    let steps = 2 * grid.refine;
    let xi_top = nu * (1.0 - best.theta);
    let xi_step = if grid.xi > 1 { xi_top / (grid.xi - 1) as f64 } else { 0.0 };
    for a in 1..steps {
        let theta = lo + (hi - lo) * a as f64 / steps as f64;
        let top = nu * (1.0 - theta);
        let xi_lo = (best.xi - xi_step).max(0.0);
        let xi_hi = (best.xi + xi_step).min(top);
        let xis: Vec<f64> = if xi_hi > xi_lo {
            (0..=steps).map(|b| xi_lo + (xi_hi - xi_lo) * b as f64 / steps as f64).collect()
        } else {
            vec![xi_lo.min(top).max(0.0)]
        };
        if !scan(theta, &xis, &mut best) {
            return None;
        }
    }
    Some(best)
}

/// No-CSI energy-per-bit achievability with the default grid policy.
pub fn nocsi_energy(cfg: &SystemConfig) -> BoundEvaluation {
    nocsi_energy_with(cfg, &GridPolicy::default())
}

pub fn nocsi_energy_with(cfg: &SystemConfig, grid: &GridPolicy) -> BoundEvaluation {
    let nus = nu_grid(cfg.eps(), grid.nu);
    let per_nu: Vec<Option<SupResult>> = nus.par_iter().map(|&nu| sup_for_nu(nu, cfg, grid)).collect();
    let mut best: Option<(f64, &SupResult)> = None;
    for (nu, res) in nus.iter().zip(per_nu.iter()) {
        if let Some(r) = res {
            if best.is_none_or(|(_, b)| r.ptot < b.ptot) {
                best = Some((*nu, r));
            }
        }
    }
    match best {
        Some((nu, r)) => BoundEvaluation::from_ptot(
            BoundKind::NoCsi,
            r.ptot,
            cfg.s(),
            Witness { theta: Some(r.theta), xi: Some(r.xi), nu: Some(nu), ..Witness::default() },
        ),
        None => BoundEvaluation::infeasible(BoundKind::NoCsi),
    }
}
