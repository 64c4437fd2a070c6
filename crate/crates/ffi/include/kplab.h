#ifndef KPLAB_H
#define KPLAB_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KplabStatus {
  KPLAB_STATUS_OK = 0,
  KPLAB_STATUS_NULL_POINTER = 1,
  KPLAB_STATUS_INVALID_ARGUMENT = 2,
  KPLAB_STATUS_DIMENSION_MISMATCH = 3,
  KPLAB_STATUS_NOT_A_CONTRACTION = 4,
  /**
   * The requested estimator cannot handle the input (dimension, budget).
   */
  KPLAB_STATUS_UNSUPPORTED = 5,
  KPLAB_STATUS_INFEASIBLE = 6,
  KPLAB_STATUS_INTERNAL = 7,
  KPLAB_STATUS_PANIC = 8,
} KplabStatus;

typedef enum KplabPolicyMode {
  KPLAB_POLICY_MODE_AUTO = 0,
  KPLAB_POLICY_MODE_QUADRATURE = 1,
  KPLAB_POLICY_MODE_MONTE_CARLO = 2,
} KplabPolicyMode;

typedef enum KplabVerdict {
  KPLAB_VERDICT_HOLDS = 0,
  KPLAB_VERDICT_HOLDS_WITHIN_NOISE = 1,
  KPLAB_VERDICT_VIOLATION = 2,
  KPLAB_VERDICT_SKIPPED = 3,
} KplabVerdict;

/**
 * A Gaussian mixture `Σ w_i N(x_i, sI)`.
 */
typedef struct KplabMixture KplabMixture;

/**
 * A certified contraction pair.
 */
typedef struct KplabPair KplabPair;

/**
 * Estimator settings. `nodes_per_axis = 0` keeps the default grid.
 */
typedef struct KplabPolicy {
  enum KplabPolicyMode mode;
  uint64_t samples;
  uint64_t seed;
  uint64_t nodes_per_axis;
} KplabPolicy;

typedef struct KplabGap {
  double h_source;
  double h_target;
  double gap;
  double std_err;
  int32_t verdict;
} KplabGap;

typedef struct KplabCapacity {
  double capacity;
  double lower;
  double upper;
  uint64_t iterations;
  bool converged;
} KplabCapacity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *kplab_version(void);

/**
 * Static description of a status code.
 */
const char *kplab_status_string(enum KplabStatus status);

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * failing call on the same thread.
 */
const char *kplab_last_error_message(void);

/**
 * Defaults: automatic method choice, 100000 samples, seed 0.
 */
struct KplabPolicy kplab_policy_default(void);

/**
 * Create the mixture `Σ w_i N(x_i, sI)` of `k` points in `R^dim`.
 *
 * # Safety
 *
 * `centers` points to `k·dim` doubles, `weights` is NULL or points to `k`
 * doubles, and `out` is writable.
 */
enum KplabStatus kplab_mixture_new(size_t dim,
                                   size_t k,
                                   const double *centers,
                                   const double *weights,
                                   double s,
                                   struct KplabMixture **out);

/**
 * Release a mixture; NULL is ignored.
 *
 * # Safety
 *
 * `m` is NULL or a handle from [`kplab_mixture_new`] not yet freed.
 */
void kplab_mixture_free(struct KplabMixture *m);

/**
 * # Safety
 *
 * `m` is a live handle or NULL (which yields 0).
 */
size_t kplab_mixture_dim(const struct KplabMixture *m);

/**
 * `log f(x)` for `x` of length `len`.
 *
 * # Safety
 *
 * `m` is a live handle, `x` points to `len` doubles, `out` is writable.
 */
enum KplabStatus kplab_mixture_log_density(const struct KplabMixture *m,
                                           const double *x,
                                           size_t len,
                                           double *out);

/**
 * Rényi entropy `h_α` in nats; `alpha` may be `INFINITY`. `policy` may be
 * NULL for defaults; `std_err` may be NULL.
 *
 * # Safety
 *
 * `m` is a live handle; `policy` is NULL or valid; `value` is writable;
 * `std_err` is NULL or writable.
 */
enum KplabStatus kplab_mixture_renyi(const struct KplabMixture *m,
                                     double alpha,
                                     const struct KplabPolicy *policy,
                                     double *value,
                                     double *std_err);

/**
 * Certify `target` as a contraction of `source` (both `k` points in
 * `R^dim`) and create a pair handle.
 *
 * # Safety
 *
 * `source` and `target` point to `k·dim` doubles, `weights` is NULL or has
 * `k` entries, `out` is writable.
 */
enum KplabStatus kplab_pair_new(size_t dim,
                                size_t k,
                                const double *source,
                                const double *target,
                                const double *weights,
                                struct KplabPair **out);

/**
 * Release a pair; NULL is ignored.
 *
 * # Safety
 *
 * `p` is NULL or a handle from [`kplab_pair_new`] not yet freed.
 */
void kplab_pair_free(struct KplabPair *p);

/**
 * Largest ratio `|T x_i − T x_j| / |x_i − x_j|` over distinct source points.
 *
 * # Safety
 *
 * `p` is a live handle and `out` is writable.
 */
enum KplabStatus kplab_pair_lipschitz(const struct KplabPair *p, double *out);

/**
 * `h_α(X + √s Z) − h_α(T(X) + √s Z)` with its verdict.
 *
 * # Safety
 *
 * `p` is a live handle; `policy` is NULL or valid; `out` is writable.
 */
enum KplabStatus kplab_kp_gap(const struct KplabPair *p,
                              double alpha,
                              double s,
                              const struct KplabPolicy *policy,
                              struct KplabGap *out);

/**
 * Blahut–Arimoto capacity of the channel `x ↦ x + √s Z` on `k` letters.
 * Optimal input weights are written to `weights_out` when it is not NULL.
 *
 * # Safety
 *
 * `alphabet` points to `k·dim` doubles; `weights_out` is NULL or has room
 * for `k` doubles; `policy` is NULL or valid; `out` is writable.
 */
enum KplabStatus kplab_capacity(size_t dim,
                                size_t k,
                                const double *alphabet,
                                double s,
                                double tol,
                                uint64_t max_iter,
                                const struct KplabPolicy *policy,
                                double *weights_out,
                                struct KplabCapacity *out);

/**
 * Monte Carlo volume of the union of radius-`r` balls around `k` centers.
 *
 * # Safety
 *
 * `centers` points to `k·dim` doubles; `volume` is writable; `std_err` is
 * NULL or writable.
 */
enum KplabStatus kplab_union_volume(size_t dim,
                                    size_t k,
                                    const double *centers,
                                    double radius,
                                    uint64_t samples,
                                    uint64_t seed,
                                    double *volume,
                                    double *std_err);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KPLAB_H */
