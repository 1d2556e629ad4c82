//! Energy-per-bit bounds in the many-user scaling regime (`K = mu n`,
//! `n -> infinity`, fixed payload `k` bits per user).
//!
//! Every evaluator returns a [`BoundEvaluation`]. Infeasibility is an
//! ordinary result (`+inf` energy, `feasible == false`), so sweeps never
//! have to handle errors point by point.

mod amp;
mod converse;
mod csir;
mod nocsi;

pub use amp::{amp_energy, amp_energy_with_cap, se_fixed_point, se_sequence, SeTrace, DEFAULT_PTOT_CAP};
pub use converse::{
    combined_converse, converse_fano, converse_iid, converse_single_user, single_user_energy_per_bit,
    single_user_energy_total, single_user_pe, IidVariant,
};
pub(crate) use converse::single_user_x;
pub use csir::{csir_energy, csir_energy_with, csir_ptot, csir_rho_inf};
pub use nocsi::{nocsi_energy, nocsi_energy_with, nocsi_ptot, NoCsiIntermediates};

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar_channel::SectionSize;

/// Payload, user density and target per-user error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    k: f64,
    mu: f64,
    eps: f64,
}

impl SystemConfig {
    pub fn new(k: f64, mu: f64, eps: f64) -> Result<Self> {
        // Validates k through the section size as well.
        SectionSize::new(k)?;
        if !(mu > 0.0 && mu < 1.0) {
            return Err(domain(format!("user density must lie in (0, 1), got {mu}")));
        }
        let eps_max = -(-k * LN_2).exp_m1();
        if !(eps > 0.0 && eps < eps_max) {
            return Err(domain(format!("target error must lie in (0, 1 - 2^-k), got {eps}")));
        }
        Ok(Self { k, mu, eps })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Spectral efficiency `S = mu k` in bits per complex degree of freedom.
    pub fn s(&self) -> f64 {
        self.mu * self.k
    }

    pub fn m(&self) -> SectionSize {
        SectionSize::new(self.k).expect("validated in SystemConfig::new")
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(self.k, mu, self.eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    NoCsi,
    Csir,
    Amp,
    ConverseFano,
    #[serde(rename = "converse-su")]
    ConverseSingleUser,
    ConverseIid,
    ConverseIidEpi,
    /// Pointwise maximum of the applicable converses.
    Converse,
    Tin,
    Tdma,
}

impl BoundKind {
    pub const ALL: [BoundKind; 10] = [
        BoundKind::NoCsi,
        BoundKind::Csir,
        BoundKind::Amp,
        BoundKind::ConverseFano,
        BoundKind::ConverseSingleUser,
        BoundKind::ConverseIid,
        BoundKind::ConverseIidEpi,
        BoundKind::Converse,
        BoundKind::Tin,
        BoundKind::Tdma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::NoCsi => "nocsi",
            BoundKind::Csir => "csir",
            BoundKind::Amp => "amp",
            BoundKind::ConverseFano => "converse-fano",
            BoundKind::ConverseSingleUser => "converse-su",
            BoundKind::ConverseIid => "converse-iid",
            BoundKind::ConverseIidEpi => "converse-iid-epi",
            BoundKind::Converse => "converse",
            BoundKind::Tin => "tin",
            BoundKind::Tdma => "tdma",
        }
    }

    pub fn is_converse(self) -> bool {
        matches!(
            self,
            BoundKind::ConverseFano
                | BoundKind::ConverseSingleUser
                | BoundKind::ConverseIid
                | BoundKind::ConverseIidEpi
                | BoundKind::Converse
        )
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown bound '{s}'; valid kinds: {}", Self::valid_names())))
    }
}

/// Optimizer arguments at which a bound was attained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub theta: Option<f64>,
    pub xi: Option<f64>,
    pub rho: Option<f64>,
    pub nu: Option<f64>,
    /// For the combined converse: which constituent is the maximum.
    pub active: Option<BoundKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEvaluation {
    pub kind: BoundKind,
    pub ebno_linear: f64,
    pub ebno_db: f64,
    pub ptot: f64,
    pub witness: Witness,
    pub feasible: bool,
    /// Diagnostics such as "vacuous" or "non-monotone-scan", and model tags.
    pub flags: Vec<String>,
}

impl BoundEvaluation {
    pub fn from_energy(kind: BoundKind, ebno: f64, s: f64, witness: Witness) -> Self {
        Self {
            kind,
            ebno_linear: ebno,
            ebno_db: to_db(ebno),
            ptot: s * ebno,
            witness,
            feasible: true,
            flags: Vec::new(),
        }
    }

    pub fn from_ptot(kind: BoundKind, ptot: f64, s: f64, witness: Witness) -> Self {
        Self::from_energy(kind, ptot / s, s, witness)
    }

    pub fn infeasible(kind: BoundKind) -> Self {
        Self {
            kind,
            ebno_linear: f64::INFINITY,
            ebno_db: f64::INFINITY,
            ptot: f64::INFINITY,
            witness: Witness::default(),
            feasible: false,
            flags: Vec::new(),
        }
    }

    pub fn with_flag(mut self, flag: impl Into<String>) -> Self {
        self.flags.push(flag.into());
        self
    }
}

/// Evaluates one bound kind with default grids. The iid converses need
/// `mu M > 1`; outside that range they report an error.
pub fn evaluate(kind: BoundKind, cfg: &SystemConfig) -> Result<BoundEvaluation> {
    Ok(match kind {
        BoundKind::NoCsi => nocsi_energy(cfg),
        BoundKind::Csir => csir_energy(cfg),
        BoundKind::Amp => amp_energy(cfg),
        BoundKind::ConverseFano => converse_fano(cfg),
        BoundKind::ConverseSingleUser => converse_single_user(cfg),
        BoundKind::ConverseIid => converse_iid(cfg, IidVariant::Standard)?,
        BoundKind::ConverseIidEpi => converse_iid(cfg, IidVariant::Epi)?,
        BoundKind::Converse => combined_converse(cfg, false),
        BoundKind::Tin => crate::baselines::tin_energy(cfg),
        BoundKind::Tdma => crate::baselines::tdma_energy(cfg),
    })
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Grid sizes for the sup/inf searches of the no-CSI and CSIR bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPolicy {
    pub nu: usize,
    pub theta: usize,
    pub xi: usize,
    pub rho: usize,
    /// Density multiplier of the local refinement around the incumbent.
    pub refine: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { nu: 64, theta: 256, xi: 128, rho: 64, refine: 8 }
    }
}

impl GridPolicy {
    /// Every grid multiplied by `factor` (used by self-convergence checks).
    pub fn scaled(&self, factor: usize) -> Self {
        Self {
            nu: self.nu * factor,
            theta: self.theta * factor,
            xi: self.xi * factor,
            rho: self.rho * factor,
            refine: self.refine,
        }
    }
}

/// `nu` grid: `points` uniform values in `(1 - eps, 1]`, ending at 1.
pub(crate) fn nu_grid(eps: f64, points: usize) -> Vec<f64> {
    (1..=points).map(|i| 1.0 - eps + eps * i as f64 / points as f64).collect()
}

/// `theta` grid over `(lo, 1]`: a quarter of the points log-spaced in the
/// distance to `lo` (from 1e-6 to 1e-1 of the range), the rest uniform.
pub(crate) fn theta_grid(lo: f64, points: usize) -> Vec<f64> {
    let width = 1.0 - lo;
    let n_log = points / 4;
    let n_lin = points - n_log;
    let mut out = Vec::with_capacity(points);
    for i in 0..n_log {
        let t = -6.0 + 5.0 * i as f64 / n_log as f64;
        out.push(lo + width * 10f64.powf(t));
    }
    for i in 1..=n_lin {
        out.push(lo + width * (0.1 + 0.9 * i as f64 / n_lin as f64));
    }
    out
}

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
pub(crate) fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Bisection for the boundary of a predicate that is false below and true
/// above. `lo` must be infeasible and `hi` feasible; returns the feasible end.
pub(crate) fn bisect_up_set<F: Fn(f64) -> bool>(feasible: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    debug_assert!(!feasible(lo) && feasible(hi));
    for _ in 0..300 {
        if hi - lo <= rel_tol * hi {
            break;
        }
        // Geometric midpoint: the searches span many decades.
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let mid = if mid <= lo || mid >= hi { 0.5 * (lo + hi) } else { mid };
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
