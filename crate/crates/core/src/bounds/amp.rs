//! AMP achievability through state evolution.

use serde::{Deserialize, Serialize};

use super::{bisect_up_set, BoundEvaluation, BoundKind, SystemConfig, Witness};
use crate::error::{domain, Result};
use crate::scalar_channel::{mmse_scaled, pupe_star, theta_star, ScalarNoise, SectionSize};

/// Default cap on the total power searched by [`amp_energy`].
pub const DEFAULT_PTOT_CAP: f64 = 1e6;

const MAX_ITERS: usize = 10_000;
const SCAN_POINTS: usize = 160;
const SCAN_LOW_DB: f64 = -2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeTrace {
    pub sigma2_seq: Vec<f64>,
    pub sigma2_inf: f64,
    pub pupe_pred: f64,
    pub iters: usize,
    pub converged: bool,
}

fn se_step(tau: f64, mu: f64, ptot: f64, m: SectionSize) -> f64 {
    mu / ptot + mu * mmse_scaled(ScalarNoise::new(tau).expect("tau stays positive"), m)
}

/// Iterates `tau_t = mu/P + mu M mmse(tau_{t-1})` from `tau_0 = mu/P + mu`.
pub fn se_fixed_point(mu: f64, ptot: f64, m: SectionSize) -> Result<SeTrace> {
    if !(mu > 0.0) || !(ptot > 0.0) || !ptot.is_finite() {
        return Err(domain(format!("state evolution needs mu > 0 and finite P_tot > 0, got ({mu}, {ptot})")));
    }
    se_trace(mu, ptot, m, MAX_ITERS)
}

/// Same iteration with a caller-chosen number of steps (no early stop before
/// convergence); used to compare against finite-`t` simulations.
pub(crate) fn se_trace(mu: f64, ptot: f64, m: SectionSize, max_iters: usize) -> Result<SeTrace> {
    let mut tau = mu / ptot + mu;
    let mut seq = vec![tau];
    let mut converged = false;
    for _ in 0..max_iters {
        let next = se_step(tau, mu, ptot, m);
        seq.push(next);
        let done = (next - tau).abs() <= 1e-10 * next;
        tau = next;
        if done {
            converged = true;
            break;
        }
    }
    let pupe_pred = pupe_star(ScalarNoise::new(tau)?, m);
    Ok(SeTrace { iters: seq.len() - 1, sigma2_seq: seq, sigma2_inf: tau, pupe_pred, converged })
}

/// `t_max` steps of state evolution, without the convergence stop.
pub fn se_sequence(mu: f64, ptot: f64, m: SectionSize, t_max: usize) -> Result<Vec<f64>> {
    if !(mu > 0.0) || !(ptot > 0.0) {
        return Err(domain(format!("state evolution needs mu > 0 and P_tot > 0, got ({mu}, {ptot})")));
    }
    let mut tau = mu / ptot + mu;
    let mut seq = vec![tau];
    for _ in 0..t_max {
        tau = se_step(tau, mu, ptot, m);
        seq.push(tau);
    }
    Ok(seq)
}

/// Minimal energy-per-bit at which state evolution predicts PUPE <= eps.
pub fn amp_energy(cfg: &SystemConfig) -> BoundEvaluation {
    amp_energy_with_cap(cfg, DEFAULT_PTOT_CAP)
}

pub fn amp_energy_with_cap(cfg: &SystemConfig, ptot_cap: f64) -> BoundEvaluation {
    let (s, mu, m) = (cfg.s(), cfg.mu(), cfg.m());
    let feasible = |ebno: f64| -> bool {
        se_fixed_point(mu, s * ebno, m).map(|tr| tr.pupe_pred <= cfg.eps()).unwrap_or(false)
    };
    let lo_db = SCAN_LOW_DB;
    let hi_db = 10.0 * (ptot_cap / s).log10();
    if hi_db <= lo_db {
        return BoundEvaluation::infeasible(BoundKind::Amp);
    }
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| 10f64.powf((lo_db + (hi_db - lo_db) * i as f64 / (SCAN_POINTS - 1) as f64) / 10.0))
        .collect();
    let flags: Vec<bool> = grid.iter().map(|&e| feasible(e)).collect();
    let Some(first) = flags.iter().position(|&f| f) else {
        return BoundEvaluation::infeasible(BoundKind::Amp);
    };
    let up_set = flags[first..].iter().all(|&f| f);
    let witness_for = |ebno: f64| {
        let tr = se_fixed_point(mu, s * ebno, m).expect("validated inputs");
        let theta = theta_star(ScalarNoise::new(tr.sigma2_inf).expect("positive"), m);
        Witness { theta: Some(theta), ..Witness::default() }
    };
    if !up_set || first == 0 {
        let e = grid[first];
        let flag = if first == 0 { "scan-floor" } else { "non-monotone-scan" };
        return BoundEvaluation::from_energy(BoundKind::Amp, e, s, witness_for(e)).with_flag(flag);
    }
    let e = bisect_up_set(feasible, grid[first - 1], grid[first], 1e-9);
    BoundEvaluation::from_energy(BoundKind::Amp, e, s, witness_for(e))
}
