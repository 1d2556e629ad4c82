//! Desk-scale Monte Carlo: complex AMP against state evolution, exhaustive
//! projection decoding, and the Beta-law check for projections onto random
//! subspaces.
//!
//! Everything is a function of the seed; parallel work is split so that the
//! thread count never changes a result.

mod amp;
mod beta_law;
mod projection;
mod system;

pub use amp::{amp_experiment, amp_run, amp_run_with, AmpExperiment, AmpOptions, AmpRunResult};
pub use beta_law::{beta_law_check, beta_law_check_against, kolmogorov_sf, ks_statistic, BetaLawReport};
pub use projection::{projection_decode_bruteforce, projection_pupe, sample_projection, ProjectionInstance, MAX_TUPLES};
pub use system::{sample_system, sample_system_with_cap, ChannelInstance, MAX_MATRIX_ENTRIES};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::baselines::block_rng;

/// `CN(0, var)` sample.
pub(crate) fn cgauss<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// `<a, b> = sum conj(a_i) b_i`.
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Removes from `v` its components along the orthonormal `basis`, then
/// normalizes. `None` if `v` is (numerically) in their span.
pub(crate) fn orthonormalize(v: &mut [Complex64], basis: &[Vec<Complex64>]) -> Option<()> {
    let before = norm_sqr(v).sqrt();
    // Two passes of classical Gram-Schmidt keep the basis orthogonal.
    for _ in 0..2 {
        for q in basis {
            let c = inner(q, v);
            for (x, y) in v.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
    }
    let after = norm_sqr(v).sqrt();
    if !(after > 1e-10 * before.max(f64::MIN_POSITIVE)) {
        return None;
    }
    for x in v.iter_mut() {
        *x /= after;
    }
    Some(())
}

/// Seed of run `index` under `master`.
pub(crate) fn derived_seed(master: u64, index: u64) -> u64 {
    block_rng(master, index).random()
}
