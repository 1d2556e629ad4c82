use num_complex::Complex64;
use rand::Rng;

use super::cgauss;
use crate::baselines::block_rng;
use crate::error::{domain, Error, Result};

/// Default cap on `n K M`, the number of stored matrix entries.
pub const MAX_MATRIX_ENTRIES: usize = 1 << 25;

/// One draw of `Y = A U + Z`.
///
/// The matrix is stored column-normalized (entries `CN(0, 1/n)`, column-major)
/// and the amplitude `a = sqrt(P_tot/mu)` is kept separately, so the physical
/// matrix is `a * matrix` with entry variance `P_tot/(mu n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelInstance {
    pub n: usize,
    pub users: usize,
    pub m_small: usize,
    pub mu: f64,
    pub ptot: f64,
    pub amplitude: f64,
    pub matrix: Vec<Complex64>,
    /// Active index within each section.
    pub support: Vec<usize>,
    pub gains: Vec<Complex64>,
    pub observation: Vec<Complex64>,
    pub seed: u64,
}

impl ChannelInstance {
    pub fn columns(&self) -> usize {
        self.users * self.m_small
    }

    pub fn column(&self, j: usize) -> &[Complex64] {
        &self.matrix[j * self.n..(j + 1) * self.n]
    }

    /// Mean physical column energy, `a^2 |A_j|^2` averaged over columns.
    pub fn mean_column_energy(&self) -> f64 {
        let a2 = self.amplitude * self.amplitude;
        a2 * super::norm_sqr(&self.matrix) / self.columns() as f64
    }

    /// The ratio `K M / n`.
    pub fn aspect(&self) -> f64 {
        self.columns() as f64 / self.n as f64
    }

    /// Effective user density `K/n` after flooring.
    pub fn mu_eff(&self) -> f64 {
        self.users as f64 / self.n as f64
    }
}

pub fn sample_system(n: usize, mu: f64, k: u32, ptot: f64, seed: u64) -> Result<ChannelInstance> {
    sample_system_with_cap(n, mu, k, ptot, seed, MAX_MATRIX_ENTRIES)
}

pub fn sample_system_with_cap(n: usize, mu: f64, k: u32, ptot: f64, seed: u64, cap: usize) -> Result<ChannelInstance> {
    if n < 64 {
        return Err(domain(format!("n must be >= 64, got {n}")));
    }
    if !(mu > 0.0) || !(mu * n as f64 >= 1.0) {
        return Err(domain(format!("need mu n >= 1, got mu = {mu}, n = {n}")));
    }
    if !(1..=10).contains(&k) {
        return Err(domain(format!("simulation supports 1 <= k <= 10, got {k}")));
    }
    if !(ptot >= 0.0) || !ptot.is_finite() {
        return Err(domain(format!("P_tot must be finite and >= 0, got {ptot}")));
    }
    let users = (mu * n as f64).floor() as usize;
    let m_small = 1usize << k;
    let entries = n.checked_mul(users).and_then(|x| x.checked_mul(m_small));
    match entries {
        Some(e) if e <= cap => {}
        _ => {
            return Err(Error::Resource(format!(
                "n K M = {n} * {users} * {m_small} exceeds the cap of {cap} matrix entries"
            )))
        }
    }
    let mut rng = block_rng(seed, 0);
    let cols = users * m_small;
    let var = 1.0 / n as f64;
    let matrix: Vec<Complex64> = (0..n * cols).map(|_| cgauss(&mut rng, var)).collect();
    let support: Vec<usize> = (0..users).map(|_| rng.random_range(0..m_small)).collect();
    let gains: Vec<Complex64> = (0..users).map(|_| cgauss(&mut rng, 1.0)).collect();
    let amplitude = (ptot / mu).sqrt();
    let mut observation: Vec<Complex64> = (0..n).map(|_| cgauss(&mut rng, 1.0)).collect();
    for (u, (&s, &h)) in support.iter().zip(&gains).enumerate() {
        let col = &matrix[(u * m_small + s) * n..(u * m_small + s + 1) * n];
        for (y, a) in observation.iter_mut().zip(col) {
            *y += a * (h * amplitude);
        }
    }
    Ok(ChannelInstance { n, users, m_small, mu, ptot, amplitude, matrix, support, gains, observation, seed })
}
