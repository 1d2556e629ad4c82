//! C ABI over the `manymac` library.
//!
//! Every entry point returns an [`MmStatus`] and writes results through out
//! pointers. Configurations and simulator states are opaque handles that the
//! caller releases with the matching `*_free` function. On failure, a
//! human-readable message for the calling thread is available through
//! [`mm_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use manymac::bounds::{self, BoundKind, SystemConfig};
use manymac::mc_sim::{self, AmpOptions, ChannelInstance};
use manymac::replica;
use manymac::scalar_channel::SectionSize;
use manymac::special_math::{self, LogProb};
use manymac::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument lies outside the domain of the function.
    Domain = 2,
    /// A scalar channel was given zero noise.
    DegenerateNoise = 3,
    /// The request exceeds a memory or search cap.
    Resource = 4,
    /// Malformed name or option.
    Usage = 5,
    Io = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

/// Bound families accepted by [`mm_bound_evaluate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmBoundKind {
    NoCsi = 0,
    Csir = 1,
    Amp = 2,
    ConverseFano = 3,
    ConverseSingleUser = 4,
    ConverseIid = 5,
    ConverseIidEpi = 6,
    Converse = 7,
    Tin = 8,
    Tdma = 9,
}

impl From<MmBoundKind> for BoundKind {
    fn from(k: MmBoundKind) -> Self {
        match k {
            MmBoundKind::NoCsi => BoundKind::NoCsi,
            MmBoundKind::Csir => BoundKind::Csir,
            MmBoundKind::Amp => BoundKind::Amp,
            MmBoundKind::ConverseFano => BoundKind::ConverseFano,
            MmBoundKind::ConverseSingleUser => BoundKind::ConverseSingleUser,
            MmBoundKind::ConverseIid => BoundKind::ConverseIid,
            MmBoundKind::ConverseIidEpi => BoundKind::ConverseIidEpi,
            MmBoundKind::Converse => BoundKind::Converse,
            MmBoundKind::Tin => BoundKind::Tin,
            MmBoundKind::Tdma => BoundKind::Tdma,
        }
    }
}

/// Outcome of one bound evaluation. Witness entries that do not apply are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmBoundResult {
    /// Non-zero when the bound is attained at a finite energy.
    pub feasible: i32,
    pub ebno_linear: f64,
    /// `+inf` when infeasible.
    pub ebno_db: f64,
    pub ptot: f64,
    pub theta: f64,
    pub xi: f64,
    pub rho: f64,
    pub nu: f64,
}

/// Replica-symmetric prediction at one operating point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmReplicaPoint {
    pub eta_star: f64,
    pub sigma2_eff: f64,
    pub pe: f64,
    pub b2: f64,
    pub pe_saturated: i32,
}

/// Summary of one AMP decoding run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmAmpSummary {
    pub iters: usize,
    pub pupe_emp: f64,
    pub pupe_hamming: f64,
    pub sigma2_final: f64,
    pub threshold_used: f64,
    pub diverged: i32,
}

/// Opaque system configuration `(k, mu, eps)`.
pub struct MmConfig {
    inner: SystemConfig,
}

/// Opaque AMP simulator: one sampled channel instance and the trace of the
/// most recent run.
pub struct MmAmpSim {
    instance: ChannelInstance,
    last_trace: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_last_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut buf = e.borrow_mut();
        buf.clear();
        buf.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn status_of(err: &Error) -> MmStatus {
    match err {
        Error::Domain(_) => MmStatus::Domain,
        Error::DegenerateNoise => MmStatus::DegenerateNoise,
        Error::Resource(_) => MmStatus::Resource,
        Error::Usage(_) | Error::Config { .. } => MmStatus::Usage,
        Error::Io(_) => MmStatus::Io,
    }
}

fn fail(status: MmStatus, msg: &str) -> MmStatus {
    set_last_error(msg);
    status
}

/// Runs `f` behind a panic guard and records the error message, if any.
fn guard<F: FnOnce() -> Result<(), MmStatus>>(f: F) -> MmStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MmStatus::Ok,
        Ok(Err(s)) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(MmStatus::Panic, &format!("panic: {msg}"))
        }
    }
}

fn lift<T>(r: manymac::Result<T>) -> Result<T, MmStatus> {
    r.map_err(|e| fail(status_of(&e), &e.to_string()))
}

fn null() -> MmStatus {
    fail(MmStatus::NullPointer, "null pointer argument")
}

/// Static description of a status code. Never null.
#[no_mangle]
pub extern "C" fn mm_status_string(status: MmStatus) -> *const c_char {
    let s: &'static CStr = match status {
        MmStatus::Ok => c"ok",
        MmStatus::NullPointer => c"null pointer argument",
        MmStatus::Domain => c"argument outside the domain",
        MmStatus::DegenerateNoise => c"degenerate noise",
        MmStatus::Resource => c"resource limit exceeded",
        MmStatus::Usage => c"usage error",
        MmStatus::Io => c"i/o error",
        MmStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length. With a
/// null `buf` or `len == 0` only the length is returned.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn mm_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: the caller guarantees `len` writable bytes.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Creates a configuration with payload `k` bits, user density `mu` and
/// target per-user error `eps`.
///
/// # Safety
/// `out` must be null or valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn mm_config_new(k: f64, mu: f64, eps: f64, out: *mut *mut MmConfig) -> MmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let inner = lift(SystemConfig::new(k, mu, eps))?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(MmConfig { inner })) };
        Ok(())
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must come from [`mm_config_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mm_config_free(cfg: *mut MmConfig) {
    if !cfg.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// # Safety
/// Same contract as [`mm_bound_evaluate`].
unsafe fn evaluate_into(cfg: *const MmConfig, kind: BoundKind, out: *mut MmBoundResult) -> Result<(), MmStatus> {
    if cfg.is_null() || out.is_null() {
        return Err(null());
    }
    // SAFETY: live handle per the contract.
    let cfg = unsafe { &(*cfg).inner };
    let e = lift(bounds::evaluate(kind, cfg))?;
    let w = e.witness;
    let res = MmBoundResult {
        feasible: e.feasible as i32,
        ebno_linear: e.ebno_linear,
        ebno_db: e.ebno_db,
        ptot: e.ptot,
        theta: w.theta.unwrap_or(f64::NAN),
        xi: w.xi.unwrap_or(f64::NAN),
        rho: w.rho.unwrap_or(f64::NAN),
        nu: w.nu.unwrap_or(f64::NAN),
    };
    // SAFETY: checked non-null above.
    unsafe { *out = res };
    Ok(())
}

/// Evaluates the minimal (achievability) or maximal (converse) energy per bit
/// of the given bound at the configuration. Infeasibility is reported through
/// `out->feasible`, not as an error.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mm_bound_evaluate(cfg: *const MmConfig, kind: MmBoundKind, out: *mut MmBoundResult) -> MmStatus {
    // SAFETY: forwarded contract.
    guard(|| unsafe { evaluate_into(cfg, kind.into(), out) })
}

/// Same as [`mm_bound_evaluate`] with the kind given by its CLI name
/// (`"amp"`, `"converse-iid"`, ...).
///
/// # Safety
/// `name` must be a NUL-terminated string; see [`mm_bound_evaluate`].
#[no_mangle]
pub unsafe extern "C" fn mm_bound_evaluate_named(
    cfg: *const MmConfig,
    name: *const c_char,
    out: *mut MmBoundResult,
) -> MmStatus {
    guard(|| {
        if name.is_null() {
            return Err(null());
        }
        // SAFETY: NUL-terminated per the contract.
        let s = unsafe { CStr::from_ptr(name) };
        let s = s.to_str().map_err(|_| fail(MmStatus::Usage, "bound name is not UTF-8"))?;
        let kind = lift(s.parse::<BoundKind>())?;
        // SAFETY: forwarded contract.
        unsafe { evaluate_into(cfg, kind, out) }
    })
}

/// `ln Q(x)` for the standard Gaussian tail. Total: NaN maps to NaN.
#[no_mangle]
pub extern "C" fn mm_q_func_ln(x: f64) -> f64 {
    catch_unwind(|| special_math::q_func(x).value()).unwrap_or(f64::NAN)
}

/// Inverse tail function from a log-probability `ln p`, `p` in `(0, 1)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mm_q_inv_ln(ln_p: f64, out: *mut f64) -> MmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let lp = lift(LogProb::new(ln_p))?;
        let x = lift(special_math::q_inv(lp))?;
        // SAFETY: checked non-null above.
        unsafe { *out = x };
        Ok(())
    })
}

/// State-evolution fixed point for the complex Bernoulli-Gaussian prior with
/// sections of `2^log2_m` entries. Either out pointer may be null.
///
/// # Safety
/// Non-null out pointers must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mm_se_fixed_point(
    mu: f64,
    ptot: f64,
    log2_m: f64,
    out_sigma2_inf: *mut f64,
    out_pupe: *mut f64,
) -> MmStatus {
    guard(|| {
        let m = lift(SectionSize::new(log2_m))?;
        let tr = lift(bounds::se_fixed_point(mu, ptot, m))?;
        // SAFETY: each pointer is checked before writing.
        unsafe {
            if !out_sigma2_inf.is_null() {
                *out_sigma2_inf = tr.sigma2_inf;
            }
            if !out_pupe.is_null() {
                *out_pupe = tr.pupe_pred;
            }
        }
        Ok(())
    })
}

/// Replica-symmetric per-user error at density `mu` and linear energy per bit
/// `ebno`, sections of `2^log2_m` entries. The value is a non-rigorous
/// prediction.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mm_replica_point(mu: f64, ebno: f64, log2_m: f64, out: *mut MmReplicaPoint) -> MmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let m = lift(SectionSize::new(log2_m))?;
        let p = lift(replica::replica_pupe(mu, ebno, m))?;
        let res = MmReplicaPoint {
            eta_star: p.eta_star,
            sigma2_eff: p.sigma2_eff,
            pe: p.pe,
            b2: p.b2,
            pe_saturated: p.pe_saturated as i32,
        };
        // SAFETY: checked non-null above.
        unsafe { *out = res };
        Ok(())
    })
}

/// Samples one channel instance with `n` channel uses, density `mu`,
/// `k`-bit sections and total power `ptot`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn mm_amp_sim_new(
    n: usize,
    mu: f64,
    k: u32,
    ptot: f64,
    seed: u64,
    out: *mut *mut MmAmpSim,
) -> MmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let instance = lift(mc_sim::sample_system(n, mu, k, ptot, seed))?;
        let sim = MmAmpSim { instance, last_trace: Vec::new() };
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(sim)) };
        Ok(())
    })
}

/// Runs AMP for up to `t_max` iterations on the sampled instance. A zero
/// `onsager` drops the Onsager correction.
///
/// # Safety
/// `sim` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn mm_amp_sim_run(sim: *mut MmAmpSim, t_max: usize, onsager: i32, out: *mut MmAmpSummary) -> MmStatus {
    guard(|| {
        if sim.is_null() || out.is_null() {
            return Err(null());
        }
        // SAFETY: live, exclusively borrowed handle per the contract.
        let sim = unsafe { &mut *sim };
        let r = lift(mc_sim::amp_run_with(&sim.instance, t_max, AmpOptions { onsager: onsager != 0 }))?;
        let res = MmAmpSummary {
            iters: r.iters,
            pupe_emp: r.pupe_emp,
            pupe_hamming: r.pupe_hamming,
            sigma2_final: *r.sigma2_emp.last().unwrap_or(&f64::NAN),
            threshold_used: r.threshold_used,
            diverged: r.diverged as i32,
        };
        sim.last_trace = r.sigma2_emp;
        // SAFETY: checked non-null above.
        unsafe { *out = res };
        Ok(())
    })
}

/// Copies up to `len` entries of the last run's residual trace
/// `|R^(t)|^2 / n`, `t = 0..=iters`, and returns the trace length.
///
/// # Safety
/// `sim` must be a live handle; `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mm_amp_sim_trace(sim: *const MmAmpSim, buf: *mut f64, len: usize) -> usize {
    if sim.is_null() {
        return 0;
    }
    // SAFETY: live handle per the contract.
    let trace = unsafe { &(*sim).last_trace };
    if !buf.is_null() {
        let n = trace.len().min(len);
        // SAFETY: the caller guarantees `len` writable entries.
        unsafe { ptr::copy_nonoverlapping(trace.as_ptr(), buf, n) };
    }
    trace.len()
}

/// Releases a simulator. Null is ignored.
///
/// # Safety
/// `sim` must come from [`mm_amp_sim_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mm_amp_sim_free(sim: *mut MmAmpSim) {
    if !sim.is_null() {
        // SAFETY: ownership returns to Rust exactly once.
        drop(unsafe { Box::from_raw(sim) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_table_matches_core_order() {
        let kinds = [
            MmBoundKind::NoCsi,
            MmBoundKind::Csir,
            MmBoundKind::Amp,
            MmBoundKind::ConverseFano,
            MmBoundKind::ConverseSingleUser,
            MmBoundKind::ConverseIid,
            MmBoundKind::ConverseIidEpi,
            MmBoundKind::Converse,
            MmBoundKind::Tin,
            MmBoundKind::Tdma,
        ];
        for (i, k) in kinds.iter().enumerate() {
            assert_eq!(BoundKind::from(*k), BoundKind::ALL[i]);
            assert_eq!(*k as usize, i);
        }
    }

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, MmStatus::Panic);
        let mut buf = [0 as c_char; 64];
        let n = unsafe { mm_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(msg, "panic: boom");
        assert_eq!(n, msg.len());
    }
}
