//! The scalar channel `V = X + sigma W`.
//!
//! Two priors live here. The complex Bernoulli-Gaussian prior (`X = 0` w.p.
//! `1 - 1/M`, `CN(0,1)` otherwise) drives AMP and its state evolution; the
//! real Bernoulli prior (`X ~ Ber(1/M)`, real Gaussian noise) drives the
//! replica predictions. They share nothing but [`SectionSize`].
//!
//! Quantities that are `O(1/M)` are returned multiplied by `M` so they stay
//! representable for `M = 2^100`.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{breakpoints, integrate_with_breaks};
use crate::special_math::{ln_one_minus_exp, log_add_exp, q_inv_ln};

/// Sections with at most this many bits also carry the exact integer `M`.
pub const SMALL_SECTION_BITS: f64 = 30.0;

/// Section size `M = 2^k`, kept as `k` so that `M` itself is never formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionSize {
    log2_m: f64,
    m_small: Option<u64>,
}

impl SectionSize {
    pub fn new(log2_m: f64) -> Result<Self> {
        if !log2_m.is_finite() || log2_m < 1.0 {
            return Err(domain(format!("section size needs log2 M >= 1, got {log2_m}")));
        }
        let m_small = if log2_m <= SMALL_SECTION_BITS {
            if log2_m.fract() != 0.0 {
                return Err(domain(format!("log2 M <= 30 must be an integer, got {log2_m}")));
            }
            Some(1u64 << (log2_m as u32))
        } else {
            None
        };
        Ok(Self { log2_m, m_small })
    }

    pub fn log2_m(&self) -> f64 {
        self.log2_m
    }

    pub fn m_small(&self) -> Option<u64> {
        self.m_small
    }

    pub fn ln_m(&self) -> f64 {
        self.log2_m * LN_2
    }

    /// ln(M - 1)
    pub fn ln_m_minus_1(&self) -> f64 {
        let ln_m = self.ln_m();
        ln_m + ln_one_minus_exp(-ln_m)
    }

    /// ln(1 - 1/M)
    pub(crate) fn ln_one_minus_inv_m(&self) -> f64 {
        ln_one_minus_exp(-self.ln_m())
    }

    fn require_small(&self) -> Result<u64> {
        self.m_small
            .ok_or_else(|| domain(format!("the denoiser needs log2 M <= 30, got {}", self.log2_m)))
    }
}

/// Noise variance `tau = sigma^2` of the scalar channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarNoise {
    tau: f64,
}

impl ScalarNoise {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau >= 0.0) || tau.is_infinite() {
            return Err(domain(format!("noise variance must be finite and >= 0, got {tau}")));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Posterior log-odds that `X != 0` given `|V|^2 = r`.
fn log_odds(r: f64, tau: f64, ln_m1: f64) -> f64 {
    (tau / (1.0 + tau)).ln() + r / (tau * (1.0 + tau)) - ln_m1
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Posterior probability that `X != 0` given `|V|^2 = r`.
fn posterior_active(r: f64, tau: f64, ln_m1: f64) -> f64 {
    sigmoid(log_odds(r, tau, ln_m1))
}

fn check_denoiser(noise: ScalarNoise, m: SectionSize) -> Result<()> {
    m.require_small()?;
    if noise.tau == 0.0 {
        return Err(Error::DegenerateNoise);
    }
    Ok(())
}

/// Posterior mean `E[X | V = v]` for the complex Bernoulli-Gaussian prior.
pub fn denoiser_eta(v: Complex64, noise: ScalarNoise, m: SectionSize) -> Result<Complex64> {
    check_denoiser(noise, m)?;
    Ok(eta_unchecked(v, noise.tau, m.ln_m_minus_1()))
}

pub(crate) fn eta_unchecked(v: Complex64, tau: f64, ln_m1: f64) -> Complex64 {
    let pi1 = posterior_active(v.norm_sqr(), tau, ln_m1);
    v * (pi1 / (1.0 + tau))
}

/// Wirtinger derivative `(d/dx - i d/dy) eta / 2` of [`denoiser_eta`].
///
/// The denoiser has the form `g(|v|^2) v`, so the derivative is the real
/// number `g + |v|^2 g'`.
pub fn denoiser_deriv(v: Complex64, noise: ScalarNoise, m: SectionSize) -> Result<Complex64> {
    check_denoiser(noise, m)?;
    Ok(Complex64::new(deriv_unchecked(v.norm_sqr(), noise.tau, m.ln_m_minus_1()), 0.0))
}

pub(crate) fn deriv_unchecked(r: f64, tau: f64, ln_m1: f64) -> f64 {
    let pi1 = posterior_active(r, tau, ln_m1);
    (pi1 + r * pi1 * (1.0 - pi1) / (tau * (1.0 + tau))) / (1.0 + tau)
}

/// Optimal support-detection threshold on `|V|^2`.
pub fn theta_star(noise: ScalarNoise, m: SectionSize) -> f64 {
    let tau = noise.tau;
    if tau == 0.0 {
        return 0.0;
    }
    tau * (1.0 + tau) * ((1.0 / tau).ln_1p() + m.ln_m_minus_1())
}

type CacheKey = (u64, u64);

fn cache() -> &'static RwLock<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn mi_cache() -> &'static RwLock<HashMap<CacheKey, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

const CACHE_LIMIT: usize = 1 << 20;

fn memoized(store: &RwLock<HashMap<CacheKey, f64>>, key: CacheKey, compute: impl FnOnce() -> f64) -> f64 {
    if let Some(v) = store.read().expect("cache lock poisoned").get(&key) {
        return *v;
    }
    let value = compute();
    let mut guard = store.write().expect("cache lock poisoned");
    if guard.len() >= CACHE_LIMIT {
        guard.clear();
    }
    guard.insert(key, value);
    value
}

/// `M * mmse(tau)` for the complex Bernoulli-Gaussian prior, in `[0, 1]`.
///
/// With `r = |V|^2 = (1+tau) s` on the active branch,
/// `M mmse = 1 - (1/(1+tau)) int_0^inf e^-s s pi1((1+tau)s) ds`.
pub fn mmse_scaled(noise: ScalarNoise, m: SectionSize) -> f64 {
    let tau = noise.tau;
    if tau == 0.0 {
        return 0.0;
    }
    memoized(cache(), (tau.to_bits(), m.log2_m.to_bits()), || mmse_scaled_uncached(tau, m))
}

fn mmse_scaled_uncached(tau: f64, m: SectionSize) -> f64 {
    let ln_m1 = m.ln_m_minus_1();
    let s_max = m.ln_m() + 50.0 + 10.0 * tau.ln_1p();
    // Where the posterior switches from "inactive" to "active".
    let s_switch = tau * ((1.0 / tau).ln_1p() + ln_m1);
    let pts = breakpoints(0.0, s_max, &[s_switch, s_switch - 5.0 * tau, s_switch + 5.0 * tau, 1.0]);
    let integral = integrate_with_breaks(
        |s: f64| (-s).exp() * s * posterior_active((1.0 + tau) * s, tau, ln_m1),
        &pts,
    )
    .value;
    (1.0 - integral / (1.0 + tau)).clamp(0.0, 1.0)
}

/// `M * psi(tau, theta, M)`: the scaled per-coordinate support-recovery error
/// of the threshold test `|V|^2 > theta`.
pub fn psi_scaled(noise: ScalarNoise, threshold: f64, m: SectionSize) -> Result<f64> {
    if !(threshold >= 0.0) {
        return Err(domain(format!("threshold must be >= 0, got {threshold}")));
    }
    let tau = noise.tau;
    let miss = -(-threshold / (1.0 + tau)).exp_m1();
    let false_alarm = if tau == 0.0 {
        if threshold == 0.0 {
            m.ln_m_minus_1().exp()
        } else {
            0.0
        }
    } else {
        (m.ln_m_minus_1() - threshold / tau).exp()
    };
    Ok(miss + false_alarm)
}

/// `psi(tau, theta, M) = (1/M)(1 - e^{-theta/(1+tau)}) + (1 - 1/M) e^{-theta/tau}`.
pub fn psi(noise: ScalarNoise, threshold: f64, m: SectionSize) -> Result<f64> {
    let scaled = psi_scaled(noise, threshold, m)?;
    Ok((scaled.ln() - m.ln_m()).exp())
}

/// `pi*(tau, M) = M inf_theta psi = 1 - ((M-1)(1/tau+1))^{-tau} / (1+tau)`.
pub fn pupe_star(noise: ScalarNoise, m: SectionSize) -> f64 {
    let tau = noise.tau;
    if tau == 0.0 {
        return 0.0;
    }
    let ln_tail = -tau.ln_1p() - tau * (m.ln_m_minus_1() + (1.0 / tau).ln_1p());
    -ln_tail.exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsStar {
    pub eps: f64,
    /// The root fell outside `(1e-300, 1 - 1e-12)` and was clamped.
    pub saturated: bool,
}

const EPS_STAR_LO: f64 = 1e-300;
const EPS_STAR_HI: f64 = 1.0 - 1e-12;

/// Root of `1/sigma = Q^-1(eps/(M-1)) + Q^-1(eps)`, the minimal error of
/// the real Bernoulli(1/M) detector with exactly-`1/M` detection rate.
pub fn eps_star_scalar(sigma: f64, m: SectionSize) -> Result<EpsStar> {
    if !(sigma > 0.0) {
        return Err(domain(format!("sigma must be > 0, got {sigma}")));
    }
    let target = 1.0 / sigma;
    let ln_m1 = m.ln_m_minus_1();
    let g = |u: f64| q_inv_ln(u - ln_m1) + q_inv_ln(u);
    let mut lo = EPS_STAR_LO.ln();
    let mut hi = EPS_STAR_HI.ln();
    if g(lo) <= target {
        return Ok(EpsStar { eps: EPS_STAR_LO, saturated: true });
    }
    if g(hi) >= target {
        return Ok(EpsStar { eps: EPS_STAR_HI, saturated: true });
    }
    // g is decreasing in u = ln eps.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1e-3) {
            break;
        }
    }
    Ok(EpsStar { eps: (0.5 * (lo + hi)).exp(), saturated: false })
}

/// `M * I(X; X + sigma W)` in nats for real `X ~ Ber(1/M)` and `W ~ N(0,1)`.
pub fn mi_bernoulli_scaled(sigma2: f64, m: SectionSize) -> Result<f64> {
    if !(sigma2 > 0.0) || sigma2.is_infinite() {
        return Err(domain(format!("sigma^2 must be finite and > 0, got {sigma2}")));
    }
    Ok(memoized(mi_cache(), (sigma2.to_bits(), m.log2_m.to_bits()), || mi_uncached(sigma2, m)))
}

/// `y - ln(1 + y)` for `y > -1`, returned as a logarithm.
fn ln_y_minus_ln1p(y: f64, ln_y: f64) -> f64 {
    if y.abs() < 1e-4 {
        // y^2/2 - y^3/3 + y^4/4
        let series = 0.5 - y / 3.0 + 0.25 * y * y;
        2.0 * y.abs().ln() + series.ln()
    } else if ln_y > 30.0 {
        // y - ln(1+y) = y (1 - ln(1+y)/y), with ln(1+y) ~ ln y
        let l1p = ln_y + (-ln_y).exp().ln_1p();
        ln_y + (-l1p * (-ln_y).exp()).ln_1p()
    } else {
        (y - y.ln_1p()).ln()
    }
}

fn mi_uncached(sigma2: f64, m: SectionSize) -> f64 {
    let sigma = sigma2.sqrt();
    let ln_m = m.ln_m();
    let ln_m1 = m.ln_m_minus_1();
    let ln_1m = m.ln_one_minus_inv_m();
    let ln_norm = -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln();

    // Log-likelihood ratio ln(p1/p0) at v.
    let llr = |v: f64| (2.0 * v - 1.0) / (2.0 * sigma2);
    let active = |v: f64| {
        let ln_p1 = ln_norm - (v - 1.0) * (v - 1.0) / (2.0 * sigma2);
        let ln_ratio = -log_add_exp(-ln_m, ln_1m - llr(v));
        ln_p1.exp() * ln_ratio
    };
    let inactive = |v: f64| {
        let b = llr(v);
        // y = (e^b - 1)/M
        let (y, ln_y) = if b > 0.0 {
            let ln_y = b + ln_one_minus_exp(-b) - ln_m;
            (if ln_y < 700.0 { ln_y.exp() } else { f64::INFINITY }, ln_y)
        } else {
            let y = b.exp_m1() * (-ln_m).exp();
            (y, f64::NAN)
        };
        if y == 0.0 {
            return 0.0;
        }
        let ln_p0 = ln_norm - v * v / (2.0 * sigma2);
        (ln_m1 + ln_p0 + ln_y_minus_ln1p(y, ln_y)).exp()
    };

    let v_star = sigma2 * ln_m + 0.5;
    let lo = -12.0 * sigma;
    let hi = 1.0 + 12.0 * sigma;
    let pts = breakpoints(lo, hi, &[-sigma, 0.0, sigma, v_star, 1.0 - sigma, 1.0, 1.0 + sigma]);
    let t1 = integrate_with_breaks(active, &pts).value;
    let t0 = integrate_with_breaks(inactive, &pts).value;
    (t1 + t0).max(0.0)
}

/// `M h(1/M)` in nats: the limit of [`mi_bernoulli_scaled`] as `sigma^2 -> 0`.
pub fn prior_entropy_scaled(m: SectionSize) -> f64 {
    // M h(1/M) = ln M - (M-1) ln(1 - 1/M)
    m.ln_m() + (m.ln_m_minus_1() + (-m.ln_one_minus_inv_m()).ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_math::ln_q;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn sec(k: f64) -> SectionSize {
        SectionSize::new(k).unwrap()
    }

    fn noise(tau: f64) -> ScalarNoise {
        ScalarNoise::new(tau).unwrap()
    }

    fn cn(rng: &mut ChaCha8Rng, var: f64) -> Complex64 {
        let s = (0.5 * var).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    }

    struct Mean {
        n: f64,
        sum: f64,
        sum2: f64,
    }

    impl Mean {
        fn new() -> Self {
            Self { n: 0.0, sum: 0.0, sum2: 0.0 }
        }
        fn push(&mut self, x: f64) {
            self.n += 1.0;
            self.sum += x;
            self.sum2 += x * x;
        }
        fn mean(&self) -> f64 {
            self.sum / self.n
        }
        fn stderr(&self) -> f64 {
            let m = self.mean();
            ((self.sum2 / self.n - m * m) / self.n).sqrt()
        }
    }

    #[test]
    fn section_size_validation() {
        assert_eq!(sec(2.0).m_small(), Some(4));
        assert_eq!(sec(100.0).m_small(), None);
        assert!(SectionSize::new(0.5).is_err());
        assert!(SectionSize::new(2.5).is_err());
        assert!((sec(1.0).ln_m_minus_1()).abs() < 1e-15);
        assert!((sec(100.0).ln_m_minus_1() - 100.0 * LN_2).abs() < 1e-13);
    }

    #[test]
    fn denoiser_limits() {
        let (n1, m4) = (noise(1.0), sec(2.0));
        assert_eq!(denoiser_eta(Complex64::new(0.0, 0.0), n1, m4).unwrap(), Complex64::new(0.0, 0.0));
        let v = Complex64::new(30.0, -40.0);
        let eta = denoiser_eta(v, n1, m4).unwrap();
        assert!((eta - v / 2.0).norm() < 1e-9);
        let d = denoiser_deriv(v, n1, m4).unwrap();
        assert!((d.re - 0.5).abs() < 1e-9);
        assert_eq!(denoiser_deriv(Complex64::new(0.0, 0.0), n1, m4).unwrap().im, 0.0);
        assert!(matches!(denoiser_eta(v, noise(0.0), m4), Err(Error::DegenerateNoise)));
        assert!(denoiser_eta(v, n1, sec(40.0)).is_err());
    }

    #[test]
    fn denoiser_matches_monte_carlo_posterior_mean() {
        // Bayes by sampling the prior: E[X | V=v] = E[X p(v|X)] / E[p(v|X)].
        let (tau, m) = (1.0, 2.0);
        let v = Complex64::new(1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut weights = Mean::new();
        let mut products = Mean::new();
        for _ in 0..10_000_000 {
            let active = rng.random::<f64>() < 1.0 / m;
            let x = if active { cn(&mut rng, 1.0) } else { Complex64::new(0.0, 0.0) };
            let w = (-(v - x).norm_sqr() / tau).exp();
            weights.push(w);
            products.push((x * w).re);
        }
        let (mx, my) = (products.mean(), weights.mean());
        let ratio = mx / my;
        // Delta-method standard error of a ratio of means (ignoring covariance, conservative).
        let se = ((products.stderr() / my).powi(2) + (mx * weights.stderr() / (my * my)).powi(2)).sqrt();
        let exact = denoiser_eta(v, noise(tau), sec(1.0)).unwrap();
        assert!((exact.re - ratio).abs() < 3.0 * se, "{} vs {ratio} +- {se}", exact.re);
        assert!(exact.im.abs() < 1e-15);
    }

    #[test]
    fn deriv_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let tau = 0.05 + 2.0 * rng.random::<f64>();
            let k = (1 + rng.random_range(0..10)) as f64;
            let (n, m) = (noise(tau), sec(k));
            let scale = (tau * (1.0 + tau) * (k * LN_2 + 2.0)).sqrt();
            let v = Complex64::new(scale * (2.0 * rng.random::<f64>() - 1.0), scale * (2.0 * rng.random::<f64>() - 1.0));
            let h = 1e-6;
            let f = |z: Complex64| denoiser_eta(z, n, m).unwrap();
            let dx = (f(v + Complex64::new(h, 0.0)) - f(v - Complex64::new(h, 0.0))) / (2.0 * h);
            let dy = (f(v + Complex64::new(0.0, h)) - f(v - Complex64::new(0.0, h))) / (2.0 * h);
            let fd = (dx - Complex64::i() * dy) * 0.5;
            let d = denoiser_deriv(v, n, m).unwrap();
            assert!((d - fd).norm() < 1e-6, "v={v} tau={tau} k={k}: {d} vs {fd}");
        }
    }

    #[test]
    fn mmse_limits() {
        assert_eq!(mmse_scaled(noise(0.0), sec(4.0)), 0.0);
        assert!(mmse_scaled(noise(1e6), sec(4.0)) > 0.999);
        assert!(mmse_scaled(noise(1e4), sec(100.0)) > 0.999);
        // Tiny tau: posterior is almost surely right, so M mmse ~ tau/(1+tau).
        let small = mmse_scaled(noise(1e-4), sec(2.0));
        assert!((small - 1e-4 / (1.0 + 1e-4)).abs() < 1e-5, "{small}");
    }

    #[test]
    fn mmse_matches_monte_carlo() {
        let (tau, k) = (1.0, 1.0);
        let (n, m) = (noise(tau), sec(k));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut acc = Mean::new();
        for _ in 0..10_000_000 {
            let active = rng.random::<f64>() < 0.5;
            let x = if active { cn(&mut rng, 1.0) } else { Complex64::new(0.0, 0.0) };
            let v = x + cn(&mut rng, tau);
            let e = x - denoiser_eta(v, n, m).unwrap();
            acc.push(2.0 * e.norm_sqr());
        }
        let got = mmse_scaled(n, m);
        assert!((got - acc.mean()).abs() < 3.0 * acc.stderr(), "{got} vs {} +- {}", acc.mean(), acc.stderr());
    }

    #[test]
    fn mmse_monotone_and_bounded() {
        for &k in &[2.0, 10.0, 100.0] {
            let mut prev = 0.0;
            for i in 0..=120 {
                let tau = 10f64.powf(-4.0 + 0.05 * i as f64);
                let v = mmse_scaled(noise(tau), sec(k));
                assert!((0.0..=1.0).contains(&v));
                assert!(v >= prev - 1e-9, "k={k} tau={tau}: {v} < {prev}");
                prev = v;
            }
        }
    }

    #[test]
    fn psi_values() {
        let m = sec(2.0);
        let p0 = psi(noise(1.0), 0.0, m).unwrap();
        assert!((p0 - 0.75).abs() < 1e-15);
        let pinf = psi(noise(1.0), 1e4, m).unwrap();
        assert!((pinf - 0.25).abs() < 1e-15);
        // (1/4)(1 - e^-1) + (3/4) e^-2, recomputed by hand.
        let hand = 0.25 * (1.0 - (-1.0f64).exp()) + 0.75 * (-2.0f64).exp();
        assert!((psi(noise(1.0), 2.0, m).unwrap() - hand).abs() < 1e-15);
        assert!(psi(noise(1.0), -1.0, m).is_err());
        assert_eq!(psi_scaled(noise(0.0), 1.0, m).unwrap(), -(-1.0f64).exp_m1());
    }

    #[test]
    fn pupe_star_limits_and_grid_oracle() {
        assert_eq!(pupe_star(noise(0.0), sec(4.0)), 0.0);
        assert!(pupe_star(noise(1e-4), sec(4.0)) < 1e-2);
        assert!(pupe_star(noise(1e3), sec(4.0)) > 0.99);
        let (n, m) = (noise(0.5), sec(4.0));
        let theta_hi = 20.0 * theta_star(n, m);
        let best = (0..=100_000)
            .map(|i| psi_scaled(n, theta_hi * i as f64 / 100_000.0, m).unwrap())
            .fold(f64::INFINITY, f64::min);
        let ps = pupe_star(n, m);
        assert!(((ps - best) / ps).abs() < 1e-6, "{ps} vs {best}");
    }

    #[test]
    fn eps_star_reference_values() {
        let e = eps_star_scalar(1.0, sec(1.0)).unwrap();
        assert!(!e.saturated);
        assert!((e.eps - ln_q(0.5).exp()).abs() < 1e-10, "{}", e.eps);
        assert!((e.eps - 0.3085).abs() < 1e-4);
        let tiny = eps_star_scalar(1e-3, sec(1.0)).unwrap();
        assert!(tiny.eps <= 1e-299 && tiny.saturated);
        assert!(eps_star_scalar(0.0, sec(1.0)).is_err());
    }

    #[test]
    fn mi_limits() {
        let m = sec(1.0);
        assert!(mi_bernoulli_scaled(1e6, m).unwrap() < 1e-6);
        let h = 2.0 * LN_2;
        assert!((mi_bernoulli_scaled(1e-4, m).unwrap() - h).abs() < 1e-9);
        let big = sec(100.0);
        let h100 = prior_entropy_scaled(big);
        assert!((mi_bernoulli_scaled(1e-4, big).unwrap() - h100).abs() < 1e-6 * h100);
        assert!((prior_entropy_scaled(m) - h).abs() < 1e-14);
    }

    #[test]
    fn mi_matches_monte_carlo() {
        // I = E[ln p(V|X)/p(V)], sampled jointly.
        let (sigma, m) = (1.0f64, 2.0f64);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut acc = Mean::new();
        let dens = |v: f64, mean: f64| (-(v - mean).powi(2) / (2.0 * sigma * sigma)).exp();
        for _ in 0..10_000_000 {
            let x = if rng.random::<f64>() < 1.0 / m { 1.0 } else { 0.0 };
            let w: f64 = rng.sample(StandardNormal);
            let v = x + sigma * w;
            let p = dens(v, 1.0) / m + dens(v, 0.0) * (1.0 - 1.0 / m);
            acc.push(m * (dens(v, x) / p).ln());
        }
        let got = mi_bernoulli_scaled(sigma * sigma, sec(1.0)).unwrap();
        assert!((got - acc.mean()).abs() < 3.0 * acc.stderr(), "{got} vs {} +- {}", acc.mean(), acc.stderr());
    }

    #[test]
    fn mi_monotone_in_noise() {
        for &k in &[1.0, 8.0, 100.0] {
            let m = sec(k);
            let mut prev = f64::INFINITY;
            for i in 0..=80 {
                let s2 = 10f64.powf(-3.0 + 0.075 * i as f64);
                let v = mi_bernoulli_scaled(s2, m).unwrap();
                assert!(v >= 0.0 && v <= prev * (1.0 + 1e-9) + 1e-12, "k={k} s2={s2}: {v} > {prev}");
                prev = v;
            }
        }
    }

    proptest! {
        #[test]
        fn pupe_star_is_psi_at_theta_star(tau in 1e-3..50.0f64, k in 1u32..=100) {
            let (n, m) = (noise(tau), sec(k as f64));
            let direct = psi_scaled(n, theta_star(n, m), m).unwrap();
            let closed = pupe_star(n, m);
            prop_assert!((direct - closed).abs() <= 1e-12 * closed.max(1e-300) + 1e-15);
        }

        #[test]
        fn pupe_star_monotone(t1 in 1e-3..20.0f64, t2 in 1e-3..20.0f64, k in 1u32..=100) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let m = sec(k as f64);
            prop_assert!(pupe_star(noise(lo), m) <= pupe_star(noise(hi), m) + 1e-15);
        }

        #[test]
        fn eps_star_monotone_in_snr(s1 in 0.02..5.0f64, s2 in 0.02..5.0f64, k in 1u32..=100) {
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let m = sec(k as f64);
            prop_assert!(eps_star_scalar(hi, m).unwrap().eps >= eps_star_scalar(lo, m).unwrap().eps * (1.0 - 1e-9));
        }
    }
}
