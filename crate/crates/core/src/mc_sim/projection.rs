use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{cgauss, inner, orthonormalize};
use crate::baselines::{block_rng, mc_mean, McEstimate};
use crate::error::{domain, Error, Result};

/// Largest number of codeword tuples searched exhaustively.
pub const MAX_TUPLES: u64 = 1_000_000;

/// `K` users with private Gaussian codebooks of `M` codewords each, Rayleigh
/// gains unknown to the decoder, `Y = sum_i H_i c_i(W_i) + Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionInstance {
    pub n: usize,
    /// Per user, `M` codewords of length `n`, stored codeword after codeword.
    pub codebooks: Vec<Vec<Complex64>>,
    pub messages: Vec<usize>,
    pub gains: Vec<Complex64>,
    pub observation: Vec<Complex64>,
}

fn draw_instance<R: Rng>(rng: &mut R, n: usize, users: usize, m: usize, ptot: f64) -> ProjectionInstance {
    let p = ptot / users as f64;
    let codebooks: Vec<Vec<Complex64>> = (0..users).map(|_| (0..n * m).map(|_| cgauss(rng, p)).collect()).collect();
    let messages: Vec<usize> = (0..users).map(|_| rng.random_range(0..m)).collect();
    let gains: Vec<Complex64> = (0..users).map(|_| cgauss(rng, 1.0)).collect();
    let mut observation: Vec<Complex64> = (0..n).map(|_| cgauss(rng, 1.0)).collect();
    for ((cb, &w), &h) in codebooks.iter().zip(&messages).zip(&gains) {
        for (y, c) in observation.iter_mut().zip(&cb[w * n..(w + 1) * n]) {
            *y += h * c;
        }
    }
    ProjectionInstance { n, codebooks, messages, gains, observation }
}

/// Codebook entries `CN(0, P_tot/K)`.
pub fn sample_projection(n: usize, users: usize, m: usize, ptot: f64, seed: u64) -> Result<ProjectionInstance> {
    check_dims(n, users, m)?;
    Ok(draw_instance(&mut block_rng(seed, 0), n, users, m, ptot))
}

fn check_dims(n: usize, users: usize, m: usize) -> Result<()> {
    if users < 1 || m < 1 || users >= n {
        return Err(domain(format!("need 1 <= K < n and M >= 1, got K = {users}, n = {n}, M = {m}")));
    }
    let tuples = (m as f64).powi(users as i32);
    if tuples > MAX_TUPLES as f64 {
        return Err(Error::Resource(format!("M^K = {tuples} exceeds the search cap {MAX_TUPLES}")));
    }
    Ok(())
}

struct Search<'a> {
    n: usize,
    codebooks: &'a [Vec<Complex64>],
    y: &'a [Complex64],
    basis: Vec<Vec<Complex64>>,
    path: Vec<usize>,
    best: f64,
    best_path: Vec<usize>,
}

impl Search<'_> {
    fn visit(&mut self, energy: f64) {
        let depth = self.path.len();
        if depth == self.codebooks.len() {
            if energy > self.best {
                self.best = energy;
                self.best_path.clone_from(&self.path);
            }
            return;
        }
        let m = self.codebooks[depth].len() / self.n;
        for w in 0..m {
            let mut v = self.codebooks[depth][w * self.n..(w + 1) * self.n].to_vec();
            self.path.push(w);
            if orthonormalize(&mut v, &self.basis).is_some() {
                let gain = inner(&v, self.y).norm_sqr();
                self.basis.push(v);
                self.visit(energy + gain);
                self.basis.pop();
            } else {
                self.visit(energy);
            }
            self.path.pop();
        }
    }
}

/// Exhaustive maximizer of `|P_span(c_1(w_1), ..., c_K(w_K)) Y|^2` over all
/// tuples; ties go to the lexicographically first tuple.
pub fn projection_decode_bruteforce(codebooks: &[Vec<Complex64>], observation: &[Complex64]) -> Result<Vec<usize>> {
    let n = observation.len();
    if n == 0 || codebooks.iter().any(|cb| cb.is_empty() || cb.len() % n != 0) {
        return Err(domain("each codebook must hold a whole number of length-n codewords"));
    }
    let m_max = codebooks.iter().map(|cb| cb.len() / n).max().unwrap_or(1);
    let tuples: f64 = codebooks.iter().map(|cb| (cb.len() / n) as f64).product();
    if codebooks.is_empty() || codebooks.len() >= n {
        return Err(domain(format!("need 1 <= K < n, got K = {}, n = {n}", codebooks.len())));
    }
    if tuples > MAX_TUPLES as f64 {
        return Err(Error::Resource(format!("{tuples} tuples (M up to {m_max}) exceed the search cap {MAX_TUPLES}")));
    }
    let mut s = Search {
        n,
        codebooks,
        y: observation,
        basis: Vec::with_capacity(codebooks.len()),
        path: Vec::with_capacity(codebooks.len()),
        best: f64::NEG_INFINITY,
        best_path: Vec::new(),
    };
    s.visit(0.0);
    Ok(s.best_path)
}

/// PUPE of the projection decoder over `trials` independent draws.
pub fn projection_pupe(n: usize, users: usize, m: usize, ptot: f64, trials: usize, seed: u64) -> Result<McEstimate> {
    check_dims(n, users, m)?;
    if trials < 1 {
        return Err(domain("need at least one trial"));
    }
    Ok(mc_mean(trials, seed, |rng: &mut ChaCha8Rng| {
        let inst = draw_instance(rng, n, users, m, ptot);
        let decoded = projection_decode_bruteforce(&inst.codebooks, &inst.observation).expect("dimensions checked");
        let wrong = decoded.iter().zip(&inst.messages).filter(|(a, b)| a != b).count();
        wrong as f64 / users as f64
    }))
}
