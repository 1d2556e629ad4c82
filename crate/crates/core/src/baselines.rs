//! Reference curves: TDMA, treating interference as noise, and the classical
//! (fixed `K`, symmetric rate) quasi-static fading results: joint outage,
//! the Shamai-Bettesh PUPE achievability and its `K -> infinity` limit, and
//! a PUPE converse on the per-user rate.
//!
//! Monte Carlo estimators split trials into fixed blocks, each with its own
//! ChaCha stream, and reduce in block order, so results do not depend on
//! the number of worker threads.

use std::f64::consts::LN_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{single_user_x, BoundEvaluation, BoundKind, SystemConfig, Witness, DEFAULT_PTOT_CAP};
use crate::error::{domain, Result};
use crate::special_math::alpha;

pub const TIN_MODEL_TAG: &str = "tin-model=su-gaussian-interference";

/// `(2^s - 1)/s / (-ln(1 - eps))`.
pub fn tdma_classical(s: f64, eps: f64) -> Result<f64> {
    if !(s > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("need s > 0 and eps in (0, 1), got ({s}, {eps})")));
    }
    Ok((s * LN_2).exp_m1() / s / -(-eps).ln_1p())
}

pub fn tdma_energy(cfg: &SystemConfig) -> BoundEvaluation {
    match tdma_classical(cfg.s(), cfg.eps()) {
        Ok(e) => BoundEvaluation::from_energy(BoundKind::Tdma, e, cfg.s(), Witness::default()),
        Err(_) => BoundEvaluation::infeasible(BoundKind::Tdma),
    }
}

/// Treating interference as noise: single-user `k`-bit detection over a
/// Rayleigh gain, with the other users' total power `S E` added to the unit
/// noise. The per-user SNR `k E / (1 + S E)` must reach the single-user
/// requirement `x*`, giving `E = x* / (k (1 - mu x*))`.
pub fn tin_energy(cfg: &SystemConfig) -> BoundEvaluation {
    let x = single_user_x(cfg.k(), cfg.eps());
    let slack = 1.0 - cfg.mu() * x;
    let e = x / (cfg.k() * slack);
    if !(slack > 0.0) || !(cfg.s() * e <= DEFAULT_PTOT_CAP) {
        return BoundEvaluation::infeasible(BoundKind::Tin).with_flag(TIN_MODEL_TAG);
    }
    BoundEvaluation::from_energy(BoundKind::Tin, e, cfg.s(), Witness::default()).with_flag(TIN_MODEL_TAG)
}

/// Symmetric-rate classical setting: `K` users at `R` bits/dof each,
/// per-user power `P = P_tot / K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalConfig {
    pub users: usize,
    pub rate_per_user: f64,
    pub ptot: f64,
    pub trials: usize,
    pub seed: u64,
}

impl ClassicalConfig {
    pub fn new(users: usize, rate_per_user: f64, ptot: f64, trials: usize, seed: u64) -> Result<Self> {
        if users < 1 || !(rate_per_user >= 0.0) || !(ptot >= 0.0) || trials < 1 {
            return Err(domain(format!(
                "need K >= 1, R >= 0, P_tot >= 0, trials >= 1; got ({users}, {rate_per_user}, {ptot}, {trials})"
            )));
        }
        Ok(Self { users, rate_per_user, ptot, trials, seed })
    }

    pub fn power_per_user(&self) -> f64 {
        self.ptot / self.users as f64
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    /// "few-trials" when fewer than [`MIN_TRIALS`] samples back the estimate.
    pub flags: Vec<String>,
}

pub const MIN_TRIALS: usize = 100;
pub(crate) const BLOCK: usize = 4096;

/// RNG for block `block` of a run seeded with `seed`.
pub(crate) fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Mean of `f` over `trials` draws; fixed blocks and block-order reduction.
pub(crate) fn mc_mean<F>(trials: usize, seed: u64, f: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let blocks = trials.div_ceil(BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b as u64);
            let len = BLOCK.min(trials - b * BLOCK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let v = f(&mut rng);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as f64;
    let mean = s / n;
    let var = if trials > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    let mut flags = Vec::new();
    if trials < MIN_TRIALS {
        flags.push("few-trials".to_string());
    }
    McEstimate { mean, stderr: (var / n).sqrt(), trials, flags }
}

fn draw_gains(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| Exp1.sample(rng)).collect()
}

/// Outage for symmetric rates given fading powers sorted ascending: some
/// subset is in outage iff some prefix of the weakest users is.
pub(crate) fn joint_outage_sorted(asc: &[f64], r: f64, p: f64) -> bool {
    let mut sum = 0.0;
    for (t, g) in asc.iter().enumerate() {
        sum += g;
        if (t + 1) as f64 * r > (p * sum).ln_1p() / LN_2 {
            return true;
        }
    }
    false
}

/// `P[exists S: log2(1 + P sum_S |H_i|^2) < |S| R]`.
pub fn joint_outage(ccfg: &ClassicalConfig) -> Result<McEstimate> {
    if ccfg.users > 20 {
        return Err(domain(format!("joint outage supports K <= 20, got {}", ccfg.users)));
    }
    let (k, r, p) = (ccfg.users, ccfg.rate_per_user, ccfg.power_per_user());
    Ok(mc_mean(ccfg.trials, ccfg.seed, |rng| {
        let mut g = draw_gains(rng, k);
        g.sort_by(f64::total_cmp);
        if joint_outage_sorted(&g, r, p) {
            1.0
        } else {
            0.0
        }
    }))
}

/// Largest `d` such that the `d` strongest users decode with the rest as
/// noise. `desc` holds fading powers sorted in decreasing order.
pub(crate) fn sb_decoded_users(desc: &[f64], r: f64, p: f64) -> usize {
    let k = desc.len();
    // suffix[d] = sum of desc[d..]
    let mut suffix = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + desc[i];
    }
    'outer: for d in (1..=k).rev() {
        let noise = 1.0 + p * suffix[d];
        let mut sum = 0.0;
        // weakest members of the top-d set first
        for t in 1..=d {
            sum += desc[d - t];
            if t as f64 * r >= (p * sum / noise).ln_1p() / LN_2 {
                continue 'outer;
            }
        }
        return d;
    }
    0
}

/// Shamai-Bettesh PUPE achievability at finite `K`: `1 - E[d*]/K`.
pub fn shamai_bettesh_finite_k(ccfg: &ClassicalConfig) -> Result<McEstimate> {
    if ccfg.users > 10_000 {
        return Err(domain(format!("K must be <= 1e4, got {}", ccfg.users)));
    }
    let (k, r, p) = (ccfg.users, ccfg.rate_per_user, ccfg.power_per_user());
    Ok(mc_mean(ccfg.trials, ccfg.seed, |rng| {
        let mut g = draw_gains(rng, k);
        g.sort_by(|a, b| b.total_cmp(a));
        1.0 - sb_decoded_users(&g, r, p) as f64 / k as f64
    }))
}

const SB_NU_POINTS: usize = 512;
const SB_THETA_POINTS: usize = 256;

/// Whether the top `nu` fraction decodes in the `K -> infinity` limit:
/// `theta s < log2(1 + P_tot alpha(nu - theta, nu) / (1 + P_tot alpha(nu, 1)))`
/// for all `theta in (0, nu]`.
fn sb_limit_ok(nu: f64, s: f64, ptot: f64) -> bool {
    if nu <= 0.0 {
        return true;
    }
    let noise = 1.0 + ptot * alpha(nu, 1.0);
    let rhs = |theta: f64| (ptot * alpha(nu - theta, nu) / noise).ln_1p() / LN_2;
    // theta -> 0: slope comparison, with d alpha / d theta = -ln nu.
    if s * LN_2 * noise >= ptot * -nu.ln() {
        return false;
    }
    (1..=SB_THETA_POINTS).all(|i| {
        let theta = nu * i as f64 / SB_THETA_POINTS as f64;
        theta * s < rhs(theta)
    })
}

/// `1 - nu*`, `nu*` the largest decodable fraction as `K -> infinity` with
/// `K R = s` and `K P = P_tot` fixed.
pub fn shamai_bettesh_asymptotic(s: f64, ptot: f64) -> Result<f64> {
    if !(s > 0.0) || !(ptot >= 0.0) {
        return Err(domain(format!("need s > 0 and P_tot >= 0, got ({s}, {ptot})")));
    }
    if ptot == 0.0 {
        return Ok(1.0);
    }
    let grid: Vec<f64> = (0..=SB_NU_POINTS).map(|i| i as f64 / SB_NU_POINTS as f64).collect();
    let Some(top) = (1..=SB_NU_POINTS).rev().find(|&i| sb_limit_ok(grid[i], s, ptot)) else {
        return Ok(1.0);
    };
    if top == SB_NU_POINTS {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (grid[top], grid[top + 1]);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if sb_limit_ok(mid, s, ptot) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(1.0 - lo)
}

/// Terms of the per-user rate converse: the Monte Carlo weakest-users term and the
/// closed-form `log2(1 - P ln(1 - eps))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConverseTerms {
    pub first: McEstimate,
    pub second: f64,
}

impl RateConverseTerms {
    pub fn value(&self) -> f64 {
        self.first.mean.min(self.second)
    }
}

pub fn rate_converse_terms(ccfg: &ClassicalConfig, eps: f64, theta: f64) -> Result<RateConverseTerms> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(theta > eps && theta <= 1.0) {
        return Err(domain(format!("theta must lie in (eps, 1], got {theta}")));
    }
    let (k, p) = (ccfg.users, ccfg.power_per_user());
    let second = (-p * (-eps).ln_1p()).ln_1p() / LN_2;
    let t = ((theta * k as f64).round() as usize).clamp(1, k);
    let scale = 1.0 / (k as f64 * (theta - eps));
    let first = mc_mean(ccfg.trials, ccfg.seed, |rng| {
        let mut g = draw_gains(rng, k);
        g.sort_by(f64::total_cmp);
        let weakest: f64 = g[..t].iter().sum();
        scale * (p * weakest).ln_1p() / LN_2
    });
    Ok(RateConverseTerms { first, second })
}

/// Upper bound on the per-user rate: the smaller of the two terms.
pub fn rate_converse(ccfg: &ClassicalConfig, eps: f64, theta: f64) -> Result<f64> {
    Ok(rate_converse_terms(ccfg, eps, theta)?.value())
}
