use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derived_seed, inner, norm_sqr, sample_system, ChannelInstance};
use crate::bounds::{se_fixed_point, se_sequence};
use crate::error::{domain, Result};
use crate::scalar_channel::{deriv_unchecked, eta_unchecked, pupe_star, theta_star, ScalarNoise, SectionSize};

const DIVERGENCE_FACTOR: f64 = 1e6;
const ROW_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmpOptions {
    /// Keep the Onsager correction in the residual update.
    pub onsager: bool,
}

impl Default for AmpOptions {
    fn default() -> Self {
        Self { onsager: true }
    }
}

/// One AMP decoding run. `sigma2_emp[t] = |R^(t)|^2 / n` in state-evolution
/// units (signal amplitude divided out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpRunResult {
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub ptot: f64,
    pub iters: usize,
    pub sigma2_emp: Vec<f64>,
    /// Fraction of sections whose detected support differs from the truth.
    pub pupe_emp: f64,
    /// Misses plus false alarms per user, `M` times the Hamming distance.
    pub pupe_hamming: f64,
    pub threshold_used: f64,
    pub diverged: bool,
}

fn apply(inst: &ChannelInstance, u: &[Complex64]) -> Vec<Complex64> {
    let n = inst.n;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out.par_chunks_mut(ROW_CHUNK).enumerate().for_each(|(c, chunk)| {
        let start = c * ROW_CHUNK;
        for (j, &uj) in u.iter().enumerate() {
            if uj == Complex64::new(0.0, 0.0) {
                continue;
            }
            let col = &inst.matrix[j * n + start..j * n + start + chunk.len()];
            for (o, a) in chunk.iter_mut().zip(col) {
                *o += a * uj;
            }
        }
    });
    out
}

fn apply_adjoint(inst: &ChannelInstance, r: &[Complex64]) -> Vec<Complex64> {
    (0..inst.columns()).into_par_iter().map(|j| inner(inst.column(j), r)).collect()
}

pub fn amp_run(inst: &ChannelInstance, t_max: usize) -> Result<AmpRunResult> {
    amp_run_with(inst, t_max, AmpOptions::default())
}

pub fn amp_run_with(inst: &ChannelInstance, t_max: usize, opts: AmpOptions) -> Result<AmpRunResult> {
    if t_max < 1 {
        return Err(domain("t_max must be >= 1"));
    }
    if !(inst.ptot > 0.0) {
        return Err(domain("AMP needs P_tot > 0"));
    }
    let n = inst.n as f64;
    let ln_m1 = ((inst.m_small - 1) as f64).ln();
    let y: Vec<Complex64> = inst.observation.iter().map(|v| v / inst.amplitude).collect();
    let aspect = inst.aspect();

    let mut r = y.clone();
    let mut u = vec![Complex64::new(0.0, 0.0); inst.columns()];
    let initial = norm_sqr(&r) / n;
    let mut sigma2_emp = vec![initial];
    // The first denoising step uses the predicted initial noise level.
    let mut tau = inst.mu_eff() / inst.ptot + inst.mu_eff();
    let mut diverged = false;
    for _ in 0..t_max {
        let mut v = apply_adjoint(inst, &r);
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi += ui;
        }
        let (u_next, dsum): (Vec<Complex64>, f64) = {
            let u_next: Vec<Complex64> = v.iter().map(|&vi| eta_unchecked(vi, tau, ln_m1)).collect();
            let d: f64 = v.iter().map(|vi| deriv_unchecked(vi.norm_sqr(), tau, ln_m1)).sum();
            (u_next, d)
        };
        let au = apply(inst, &u_next);
        let onsager = if opts.onsager { aspect * dsum / u.len() as f64 } else { 0.0 };
        r = y.iter().zip(&au).zip(&r).map(|((yi, ai), ri)| yi - ai + ri * onsager).collect();
        u = u_next;
        tau = norm_sqr(&r) / n;
        sigma2_emp.push(tau);
        if !(tau <= DIVERGENCE_FACTOR * initial) {
            diverged = true;
            break;
        }
    }
    let mut v = apply_adjoint(inst, &r);
    for (vi, ui) in v.iter_mut().zip(&u) {
        *vi += ui;
    }
    let m = inst.m_small;
    let section = SectionSize::new((m as f64).log2())?;
    let threshold = theta_star(ScalarNoise::new(tau.max(f64::MIN_POSITIVE))?, section);
    let (mut section_errors, mut coord_errors) = (0usize, 0usize);
    for (user, &s) in inst.support.iter().enumerate() {
        let mut wrong = 0;
        for i in 0..m {
            let detected = v[user * m + i].norm_sqr() > threshold;
            if detected != (i == s) {
                wrong += 1;
            }
        }
        coord_errors += wrong;
        section_errors += (wrong > 0) as usize;
    }
    let k = inst.users as f64;
    Ok(AmpRunResult {
        seed: inst.seed,
        n: inst.n,
        users: inst.users,
        m,
        ptot: inst.ptot,
        iters: sigma2_emp.len() - 1,
        sigma2_emp,
        pupe_emp: section_errors as f64 / k,
        pupe_hamming: coord_errors as f64 / k,
        threshold_used: threshold,
        diverged,
    })
}

/// Many independent AMP runs compared against state evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpExperiment {
    pub runs: Vec<AmpRunResult>,
    pub n_runs: usize,
    pub pupe_emp_mean: f64,
    pub stderr: f64,
    /// `pi*(sigma_inf^2, M)` from the state-evolution fixed point.
    pub pupe_pred: f64,
    pub sigma2_inf: f64,
    pub se: Vec<f64>,
    pub sigma2_emp_mean: Vec<f64>,
    /// `|mean sigma2_emp[t] - se[t]| / se[t]`.
    pub deviation: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn amp_experiment(
    n: usize,
    mu: f64,
    k: u32,
    ptot: f64,
    t_max: usize,
    runs: usize,
    master_seed: u64,
    opts: AmpOptions,
) -> Result<AmpExperiment> {
    if runs < 1 {
        return Err(domain("need at least one run"));
    }
    // Validate once before spawning work.
    let probe = sample_system(n, mu, k, ptot, derived_seed(master_seed, 0))?;
    let mu_eff = probe.mu_eff();
    drop(probe);
    let results: Vec<AmpRunResult> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let inst = sample_system(n, mu, k, ptot, derived_seed(master_seed, i))?;
            amp_run_with(&inst, t_max, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let rn = runs as f64;
    let mean = results.iter().map(|r| r.pupe_emp).sum::<f64>() / rn;
    let var = if runs > 1 {
        results.iter().map(|r| (r.pupe_emp - mean).powi(2)).sum::<f64>() / (rn - 1.0)
    } else {
        0.0
    };
    let m = SectionSize::new(k as f64)?;
    let fp = se_fixed_point(mu_eff, ptot, m)?;
    let se = se_sequence(mu_eff, ptot, m, t_max)?;
    let mut sigma2_emp_mean = vec![0.0; t_max + 1];
    let mut counts = vec![0usize; t_max + 1];
    for r in &results {
        for (t, v) in r.sigma2_emp.iter().enumerate() {
            sigma2_emp_mean[t] += v;
            counts[t] += 1;
        }
    }
    for (s, c) in sigma2_emp_mean.iter_mut().zip(&counts) {
        *s = if *c > 0 { *s / *c as f64 } else { f64::NAN };
    }
    let deviation = sigma2_emp_mean.iter().zip(&se).map(|(e, s)| (e - s).abs() / s).collect();
    Ok(AmpExperiment {
        runs: results,
        n_runs: runs,
        pupe_emp_mean: mean,
        stderr: (var / rn).sqrt(),
        pupe_pred: pupe_star(ScalarNoise::new(fp.sigma2_inf)?, m),
        sigma2_inf: fp.sigma2_inf,
        se,
        sigma2_emp_mean,
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn high_power_recovers() {
        let inst = sample_system(512, 0.1, 2, 1e3, 4).unwrap();
        let r = amp_run(&inst, 20).unwrap();
        assert!(r.pupe_emp <= 0.01, "{}", r.pupe_emp);
        assert_eq!(r.sigma2_emp.len(), r.iters + 1);
        assert!(r.sigma2_emp.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn tiny_power_fails() {
        let inst = sample_system(512, 0.1, 2, 1e-3, 4).unwrap();
        let r = amp_run(&inst, 10).unwrap();
        assert!(r.pupe_emp >= 0.9, "{}", r.pupe_emp);
    }

    #[test]
    fn adjoint_is_adjoint() {
        let inst = sample_system(64, 0.1, 2, 1.0, 3).unwrap();
        let mut rng = crate::baselines::block_rng(5, 0);
        let u: Vec<Complex64> = (0..inst.columns()).map(|_| super::super::cgauss(&mut rng, 1.0)).collect();
        let r: Vec<Complex64> = (0..inst.n).map(|_| super::super::cgauss(&mut rng, 1.0)).collect();
        let lhs = inner(&r, &apply(&inst, &u));
        let rhs = inner(&apply_adjoint(&inst, &r), &u);
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm());
    }

    #[test]
    fn experiment_reproducible_across_threads() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| amp_experiment(256, 0.25, 2, 4.0, 5, 4, 11, AmpOptions::default()).unwrap())
        };
        let (a, b) = (run(1), run(8));
        assert_eq!(a, b);
        assert_eq!(a.runs.len(), 4);
        assert_eq!(a.deviation.len(), 6);
    }

    #[test]
    fn rejects_bad_runs() {
        let inst = sample_system(64, 0.1, 2, 1.0, 3).unwrap();
        assert!(amp_run(&inst, 0).is_err());
        let silent = sample_system(64, 0.1, 2, 0.0, 3).unwrap();
        assert!(amp_run(&silent, 3).is_err());
    }
}
