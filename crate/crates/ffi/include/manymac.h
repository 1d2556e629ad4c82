#ifndef MANYMAC_H
#define MANYMAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum MmStatus {
  MM_STATUS_OK = 0,
  // A required pointer argument was null.
  MM_STATUS_NULL_POINTER = 1,
  // An argument lies outside the domain of the function.
  MM_STATUS_DOMAIN = 2,
  // A scalar channel was given zero noise.
  MM_STATUS_DEGENERATE_NOISE = 3,
  // The request exceeds a memory or search cap.
  MM_STATUS_RESOURCE = 4,
  // Malformed name or option.
  MM_STATUS_USAGE = 5,
  MM_STATUS_IO = 6,
  // A Rust panic was caught at the boundary.
  MM_STATUS_PANIC = 7,
} MmStatus;

// Bound families accepted by [`mm_bound_evaluate`].
typedef enum MmBoundKind {
  MM_BOUND_KIND_NO_CSI = 0,
  MM_BOUND_KIND_CSIR = 1,
  MM_BOUND_KIND_AMP = 2,
  MM_BOUND_KIND_CONVERSE_FANO = 3,
  MM_BOUND_KIND_CONVERSE_SINGLE_USER = 4,
  MM_BOUND_KIND_CONVERSE_IID = 5,
  MM_BOUND_KIND_CONVERSE_IID_EPI = 6,
  MM_BOUND_KIND_CONVERSE = 7,
  MM_BOUND_KIND_TIN = 8,
  MM_BOUND_KIND_TDMA = 9,
} MmBoundKind;

// Opaque AMP simulator: one sampled channel instance and the trace of the
// most recent run.
typedef struct MmAmpSim MmAmpSim;

// Opaque system configuration `(k, mu, eps)`.
typedef struct MmConfig MmConfig;

// Outcome of one bound evaluation. Witness entries that do not apply are NaN.
typedef struct MmBoundResult {
  // Non-zero when the bound is attained at a finite energy.
  int32_t feasible;
  double ebno_linear;
  // `+inf` when infeasible.
  double ebno_db;
  double ptot;
  double theta;
  double xi;
  double rho;
  double nu;
} MmBoundResult;

// Replica-symmetric prediction at one operating point.
typedef struct MmReplicaPoint {
  double eta_star;
  double sigma2_eff;
  double pe;
  double b2;
  int32_t pe_saturated;
} MmReplicaPoint;

// Summary of one AMP decoding run.
typedef struct MmAmpSummary {
  size_t iters;
  double pupe_emp;
  double pupe_hamming;
  double sigma2_final;
  double threshold_used;
  int32_t diverged;
} MmAmpSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static description of a status code. Never null.
const char *mm_status_string(enum MmStatus status);

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len - 1` bytes) and returns the full message length. With a
// null `buf` or `len == 0` only the length is returned.
//
// # Safety
// `buf` must be null or valid for `len` bytes of writes.
size_t mm_last_error_message(char *buf, size_t len);

// Creates a configuration with payload `k` bits, user density `mu` and
// target per-user error `eps`.
//
// # Safety
// `out` must be null or valid for one pointer write.
enum MmStatus mm_config_new(double k, double mu, double eps, struct MmConfig **out);

// Releases a configuration. Null is ignored.
//
// # Safety
// `cfg` must come from [`mm_config_new`] and not have been freed.
void mm_config_free(struct MmConfig *cfg);

// Evaluates the minimal (achievability) or maximal (converse) energy per bit
// of the given bound at the configuration. Infeasibility is reported through
// `out->feasible`, not as an error.
//
// # Safety
// `cfg` must be a live handle; `out` must be valid for one write.
enum MmStatus mm_bound_evaluate(const struct MmConfig *cfg,
                                enum MmBoundKind kind,
                                struct MmBoundResult *out);

// Same as [`mm_bound_evaluate`] with the kind given by its CLI name
// (`"amp"`, `"converse-iid"`, ...).
//
// # Safety
// `name` must be a NUL-terminated string; see [`mm_bound_evaluate`].
enum MmStatus mm_bound_evaluate_named(const struct MmConfig *cfg,
                                      const char *name,
                                      struct MmBoundResult *out);

// `ln Q(x)` for the standard Gaussian tail. Total: NaN maps to NaN.
double mm_q_func_ln(double x);

// Inverse tail function from a log-probability `ln p`, `p` in `(0, 1)`.
//
// # Safety
// `out` must be valid for one write.
enum MmStatus mm_q_inv_ln(double ln_p, double *out);

// State-evolution fixed point for the complex Bernoulli-Gaussian prior with
// sections of `2^log2_m` entries. Either out pointer may be null.
//
// # Safety
// Non-null out pointers must be valid for one write.
enum MmStatus mm_se_fixed_point(double mu,
                                double ptot,
                                double log2_m,
                                double *out_sigma2_inf,
                                double *out_pupe);

// Replica-symmetric per-user error at density `mu` and linear energy per bit
// `ebno`, sections of `2^log2_m` entries. The value is a non-rigorous
// prediction.
//
// # Safety
// `out` must be valid for one write.
enum MmStatus mm_replica_point(double mu, double ebno, double log2_m, struct MmReplicaPoint *out);

// Samples one channel instance with `n` channel uses, density `mu`,
// `k`-bit sections and total power `ptot`.
//
// # Safety
// `out` must be valid for one pointer write.
enum MmStatus mm_amp_sim_new(size_t n,
                             double mu,
                             uint32_t k,
                             double ptot,
                             uint64_t seed,
                             struct MmAmpSim **out);

// Runs AMP for up to `t_max` iterations on the sampled instance. A zero
// `onsager` drops the Onsager correction.
//
// # Safety
// `sim` must be a live handle; `out` must be valid for one write.
enum MmStatus mm_amp_sim_run(struct MmAmpSim *sim,
                             size_t t_max,
                             int32_t onsager,
                             struct MmAmpSummary *out);

// Copies up to `len` entries of the last run's residual trace
// `|R^(t)|^2 / n`, `t = 0..=iters`, and returns the trace length.
//
// # Safety
// `sim` must be a live handle; `buf` must be null or valid for `len` writes.
size_t mm_amp_sim_trace(const struct MmAmpSim *sim, double *buf, size_t len);

// Releases a simulator. Null is ignored.
//
// # Safety
// `sim` must come from [`mm_amp_sim_new`] and not have been freed.
void mm_amp_sim_free(struct MmAmpSim *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MANYMAC_H */
