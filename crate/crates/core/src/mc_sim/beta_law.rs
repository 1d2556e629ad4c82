//! Squared projection of a fixed vector onto a random `t`-dimensional
//! subspace of the orthogonal complement of `K_1 - t` random directions in
//! `C^n`, normalized by the complement energy. Its law is Beta(t, n - K_1).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cgauss, inner, norm_sqr, orthonormalize};
use crate::baselines::{block_rng, BLOCK};
use crate::error::{domain, Result};
use crate::special_math::reg_inc_beta;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaLawReport {
    pub n: usize,
    pub big_k: usize,
    pub t: usize,
    pub trials: usize,
    /// Parameters of the reference Beta law.
    pub a: f64,
    pub b: f64,
    pub statistic: f64,
    pub p_value: f64,
}

fn one_sample(rng: &mut rand_chacha::ChaCha8Rng, n: usize, big_k: usize, t: usize) -> f64 {
    let y: Vec<Complex64> = (0..n).map(|_| cgauss(rng, 1.0)).collect();
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(big_k);
    while basis.len() < big_k - t {
        let mut v: Vec<Complex64> = (0..n).map(|_| cgauss(rng, 1.0)).collect();
        if orthonormalize(&mut v, &basis).is_some() {
            basis.push(v);
        }
    }
    let mut y_perp = y;
    for q in &basis {
        let c = inner(q, &y_perp);
        for (x, qi) in y_perp.iter_mut().zip(q) {
            *x -= c * qi;
        }
    }
    let total = norm_sqr(&y_perp);
    let mut captured = 0.0;
    let mut added = 0;
    while added < t {
        let mut v: Vec<Complex64> = (0..n).map(|_| cgauss(rng, 1.0)).collect();
        if orthonormalize(&mut v, &basis).is_some() {
            captured += inner(&v, &y_perp).norm_sqr();
            basis.push(v);
            added += 1;
        }
    }
    captured / total
}

fn samples(n: usize, big_k: usize, t: usize, trials: usize, seed: u64) -> Vec<f64> {
    let blocks = trials.div_ceil(BLOCK);
    let per_block: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut rng = block_rng(seed, blk as u64);
            let len = BLOCK.min(trials - blk * BLOCK);
            (0..len).map(|_| one_sample(&mut rng, n, big_k, t)).collect()
        })
        .collect();
    per_block.concat()
}

/// Two-sided Kolmogorov-Smirnov statistic of `data` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> f64 {
    let mut xs = data.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Survival function of the Kolmogorov distribution, `P[K > lambda]`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // Jacobi-transformed series, fast for small lambda.
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|j| ((2 * j - 1) as f64).powi(2) * c).map(f64::exp).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|j| {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (j * j) as f64 * lambda * lambda).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

fn validate(n: usize, big_k: usize, t: usize, trials: usize) -> Result<()> {
    if t == 0 {
        return Err(domain("t must be >= 1 (empty projection)"));
    }
    if !(t <= big_k && big_k < n) {
        return Err(domain(format!("need 1 <= t <= K_1 < n, got t = {t}, K_1 = {big_k}, n = {n}")));
    }
    if trials < 500 {
        return Err(domain(format!("need at least 500 trials, got {trials}")));
    }
    Ok(())
}

/// KS test of the simulated statistic against Beta(t, n - K_1).
pub fn beta_law_check(n: usize, big_k: usize, t: usize, trials: usize, seed: u64) -> Result<BetaLawReport> {
    beta_law_check_against(n, big_k, t, trials, seed, t as f64, (n - big_k.min(n)) as f64)
}

/// Same sample, tested against an arbitrary Beta(a, b).
pub fn beta_law_check_against(
    n: usize,
    big_k: usize,
    t: usize,
    trials: usize,
    seed: u64,
    a: f64,
    b: f64,
) -> Result<BetaLawReport> {
    validate(n, big_k, t, trials)?;
    if !(a > 0.0 && b > 0.0) {
        return Err(domain(format!("Beta parameters must be > 0, got ({a}, {b})")));
    }
    let xs = samples(n, big_k, t, trials, seed);
    let d = ks_statistic(&xs, |x| reg_inc_beta(x.clamp(0.0, 1.0), a, b).unwrap_or(f64::NAN));
    let sn = (trials as f64).sqrt();
    let p = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
    Ok(BetaLawReport { n, big_k, t, trials, a, b, statistic: d, p_value: p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_values() {
        // scipy.special.kolmogorov
        assert!((kolmogorov_sf(1.0) - 0.269_999_671_677_354_56).abs() < 1e-12);
        assert!((kolmogorov_sf(0.5) - 0.963_945_243_664_875_1).abs() < 1e-12);
        assert!((kolmogorov_sf(1.36) - 0.049_485_876_755_377_876).abs() < 1e-12);
        assert!((kolmogorov_sf(0.999_999) - kolmogorov_sf(1.000_001)).abs() < 1e-5);
    }

    #[test]
    fn ks_uniform_exact() {
        let d = ks_statistic(&[0.1, 0.5, 0.9], |x| x);
        // Largest gap: 1/3 - 0.1 at the first point.
        assert!((d - (1.0 / 3.0 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn claimed_law_accepted_shifted_rejected() {
        let good = beta_law_check(64, 16, 4, 2000, 1).unwrap();
        assert!(good.p_value > 0.01, "{good:?}");
        assert_eq!((good.a, good.b), (4.0, 48.0));
        let bad = beta_law_check_against(64, 16, 4, 2000, 1, 5.0, 48.0).unwrap();
        assert!(bad.p_value < 0.01, "{bad:?}");
        assert_eq!(good.statistic.to_bits(), beta_law_check(64, 16, 4, 2000, 1).unwrap().statistic.to_bits());
    }

    #[test]
    fn degenerate_inputs() {
        assert!(beta_law_check(64, 16, 0, 2000, 1).is_err());
        assert!(beta_law_check(64, 64, 4, 2000, 1).is_err());
        assert!(beta_law_check(64, 16, 4, 100, 1).is_err());
    }
}
