//! Achievability with channel state information at the receiver.

use rayon::prelude::*;

use super::{golden_min, nu_grid, theta_grid, BoundEvaluation, BoundKind, GridPolicy, SystemConfig, Witness};
use crate::error::{domain, Result};
use crate::special_math::{alpha, h_nats};

fn ptot_raw(theta: f64, rho: f64, nu: f64, cfg: &SystemConfig) -> f64 {
    let h = h_nats(theta);
    let mu_nu = cfg.mu() * nu;
    let ln_m = cfg.m().ln_m();
    let exponent = if rho == 0.0 {
        if h > 0.0 {
            return f64::INFINITY;
        }
        mu_nu * theta * ln_m
    } else {
        mu_nu * (h / rho + theta * ln_m)
    };
    if exponent > 700.0 {
        return f64::INFINITY;
    }
    let e = exponent.exp_m1();
    let denom = alpha(nu * (1.0 - theta), nu) - e * alpha(nu, 1.0) * (1.0 + rho);
    if !(denom > 0.0) {
        return f64::INFINITY;
    }
    (1.0 + rho) * e / denom
}

/// `P_tot,nu(theta, rho)`; `+inf` where the denominator is not positive.
pub fn csir_ptot(theta: f64, rho: f64, nu: f64, cfg: &SystemConfig) -> Result<f64> {
    let eps = cfg.eps();
    if !(nu > 1.0 - eps && nu <= 1.0) {
        return Err(domain(format!("nu must lie in (1 - eps, 1], got {nu}")));
    }
    let eps_prime = eps - (1.0 - nu);
    if !(theta > eps_prime / nu && theta <= 1.0) {
        return Err(domain(format!("theta must lie in (eps'/nu, 1], got {theta}")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(domain(format!("rho must lie in [0, 1], got {rho}")));
    }
    Ok(ptot_raw(theta, rho, nu, cfg))
}

/// `inf_{0 < rho <= 1} P_tot,nu(theta, rho)`: grid search then golden section.
/// Returns `(rho*, P*)`.
pub fn csir_rho_inf(theta: f64, nu: f64, cfg: &SystemConfig, points: usize) -> (f64, f64) {
    if h_nats(theta) == 0.0 {
        // Increasing in rho; the infimum is the rho -> 0 limit.
        return (0.0, ptot_raw(theta, 0.0, nu, cfg));
    }
    let grid: Vec<f64> = (1..=points).map(|i| i as f64 / points as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&r| ptot_raw(theta, r, nu, cfg)).collect();
    let (mut i_best, mut v_best) = (0, f64::INFINITY);
    for (i, &v) in vals.iter().enumerate() {
        if v < v_best {
            i_best = i;
            v_best = v;
        }
    }
    if !v_best.is_finite() {
        return (f64::NAN, f64::INFINITY);
    }
    let lo = if i_best == 0 { 0.0 } else { grid[i_best - 1] };
    let hi = grid[(i_best + 1).min(points - 1)];
    let (r, v) = golden_min(|r| if r <= 0.0 { f64::INFINITY } else { ptot_raw(theta, r, nu, cfg) }, lo, hi, 1e-10);
    if v < v_best {
        (r, v)
    } else {
        (grid[i_best], v_best)
    }
}

struct SupResult {
    ptot: f64,
    theta: f64,
    rho: f64,
}

fn sup_for_nu(nu: f64, cfg: &SystemConfig, grid: &GridPolicy) -> Option<SupResult> {
    let lo_theta = (cfg.eps() - (1.0 - nu)) / nu;
    let thetas = theta_grid(lo_theta, grid.theta);
    let mut best = SupResult { ptot: f64::NEG_INFINITY, theta: f64::NAN, rho: f64::NAN };
    let mut best_i = 0;
    for (i, &theta) in thetas.iter().enumerate() {
        let (rho, p) = csir_rho_inf(theta, nu, cfg, grid.rho);
        if !p.is_finite() {
            return None;
        }
        if p > best.ptot {
            best = SupResult { ptot: p, theta, rho };
            best_i = i;
        }
    }
    let lo = if best_i == 0 { lo_theta } else { thetas[best_i - 1] };
    let hi = thetas[(best_i + 1).min(thetas.len() - 1)];
    let steps = 2 * grid.refine;
    for a in 1..steps {
        let theta = lo + (hi - lo) * a as f64 / steps as f64;
        let (rho, p) = csir_rho_inf(theta, nu, cfg, grid.rho);
        if !p.is_finite() {
            return None;
        }
        if p > best.ptot {
            best = SupResult { ptot: p, theta, rho };
        }
    }
    Some(best)
}

/// CSIR energy-per-bit achievability with the default grid policy.
pub fn csir_energy(cfg: &SystemConfig) -> BoundEvaluation {
    csir_energy_with(cfg, &GridPolicy::default())
}

pub fn csir_energy_with(cfg: &SystemConfig, grid: &GridPolicy) -> BoundEvaluation {
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
            BoundKind::Csir,
            r.ptot,
            cfg.s(),
            Witness { theta: Some(r.theta), rho: Some(r.rho), nu: Some(nu), ..Witness::default() },
        ),
        None => BoundEvaluation::infeasible(BoundKind::Csir),
    }
}
