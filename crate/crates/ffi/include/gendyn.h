#ifndef GENDYN_H
#define GENDYN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum GendynStatus {
  GENDYN_STATUS_OK = 0,
  GENDYN_STATUS_NULL_POINTER = 1,
  GENDYN_STATUS_INVALID_ARGUMENT = 2,
  GENDYN_STATUS_CONFIG_PARSE = 3,
  GENDYN_STATUS_DIMENSION_MISMATCH = 4,
  GENDYN_STATUS_NOT_DETECTABLE = 5,
  GENDYN_STATUS_BELOW_THRESHOLD = 6,
  GENDYN_STATUS_INVALID_INIT = 7,
  GENDYN_STATUS_OUT_OF_RANGE = 8,
  GENDYN_STATUS_EMPTY_REGION = 9,
  GENDYN_STATUS_DIVERGENCE = 10,
  GENDYN_STATUS_SAMPLING_REGIME = 11,
  GENDYN_STATUS_IO = 12,
  /**
   * A Rust panic was caught at the boundary.
   */
  GENDYN_STATUS_INTERNAL = 99,
} GendynStatus;

/**
 * Prepared train/test error curves for one teacher and student setup.
 */
typedef struct GendynTheory GendynTheory;

/**
 * Error trace of one gradient-descent run.
 */
typedef struct GendynTrace GendynTrace;

typedef struct GendynOverlap {
  double o_u;
  double o_v;
  double o;
} GendynOverlap;

typedef struct GendynTransfer {
  double eps_a_alone;
  double eps_a_joint;
  /**
   * Positive when training on task B alongside improves task A.
   */
  double benefit;
} GendynTransfer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next `gendyn_*` call on this thread.
 */
const char *gendyn_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gendyn_version(void);

/**
 * Position of the data singular value produced by a teacher mode of size `sbar`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum GendynStatus gendyn_shat_of_sbar(double sbar, double aspect, double scale, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum GendynStatus gendyn_sbar_of_shat(double shat, double aspect, double scale, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum GendynStatus gendyn_overlap(double sbar,
                                 double aspect,
                                 double scale,
                                 struct GendynOverlap *out);

/**
 * Marchenko–Pastur density of singular values.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum GendynStatus gendyn_mp_density(double shat, double aspect, double scale, double *out);

/**
 * Strength at time `t` of a mode growing from `eps` towards `shat`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum GendynStatus gendyn_s_of_t(double t,
                                double shat,
                                double eps,
                                double tau,
                                uint32_t depth,
                                double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum GendynStatus gendyn_t_of_s(double s,
                                double shat,
                                double eps,
                                double tau,
                                uint32_t depth,
                                double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum GendynStatus gendyn_transition_time(double shat,
                                         double eps,
                                         double tau,
                                         uint32_t depth,
                                         double *out);

/**
 * Builds the curves for teacher singular values `snrs[0..n_snrs]` (descending).
 * `n2 = 0` means a full-width student (N₂ = N₃) and `samples = 0` means P = N₁.
 *
 * # Safety
 * `snrs` must point to `n_snrs` doubles; `out` must be valid for writes.
 */
enum GendynStatus gendyn_theory_new(const double *snrs,
                                    size_t n_snrs,
                                    size_t n1,
                                    size_t n3,
                                    size_t n2,
                                    size_t samples,
                                    double eps,
                                    uint32_t depth,
                                    struct GendynTheory **out);

/**
 * # Safety
 * `handle` must come from `gendyn_theory_new` and not be used afterwards.
 */
void gendyn_theory_free(struct GendynTheory *handle);

/**
 * Relative test error at time `t` (units of τ).
 *
 * # Safety
 * `handle` must be live and `out` valid for writes.
 */
enum GendynStatus gendyn_theory_test_error(const struct GendynTheory *handle,
                                           double t,
                                           double *out);

/**
 * Relative train error at time `t`. Undersampled setups have no train curve
 * and return `GENDYN_STATUS_SAMPLING_REGIME`.
 *
 * # Safety
 * `handle` must be live and `out` valid for writes.
 */
enum GendynStatus gendyn_theory_train_error(const struct GendynTheory *handle,
                                            double t,
                                            double *out);

/**
 * Optimal early-stopping time and the test error reached there.
 *
 * # Safety
 * `handle` must be live; `t_opt` and `eps_min` valid for writes.
 */
enum GendynStatus gendyn_theory_optimal_stopping(const struct GendynTheory *handle,
                                                 double *t_opt,
                                                 double *eps_min);

/**
 * Trains one student described by a TOML experiment config (the same format
 * as `gendyn simulate --config`). The config's `kind` is ignored.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `out` valid for writes.
 */
enum GendynStatus gendyn_simulate(const char *config_toml, uint64_t seed, struct GendynTrace **out);

/**
 * # Safety
 * `handle` must come from `gendyn_simulate` and not be used afterwards.
 */
void gendyn_trace_free(struct GendynTrace *handle);

/**
 * Number of recorded points. 0 for a NULL handle.
 *
 * # Safety
 * `handle` must be live or NULL.
 */
size_t gendyn_trace_len(const struct GendynTrace *handle);

/**
 * Copies times (units of τ), train and test errors into caller buffers of
 * length `len`, which must equal `gendyn_trace_len`. Any buffer may be NULL.
 *
 * # Safety
 * `handle` must be live; non-NULL buffers must hold `len` doubles.
 */
enum GendynStatus gendyn_trace_copy(const struct GendynTrace *handle,
                                    double *times,
                                    double *train,
                                    double *test,
                                    size_t len);

/**
 * Denoises a `rows × cols` row-major matrix in place of `out` (same shape).
 * `aspect <= 0` takes min(rows, cols)/max(rows, cols); the noise scale is
 * `scale`. `n_detected` (may be NULL) receives the number of kept modes.
 *
 * # Safety
 * `data` and `out` must hold `rows * cols` doubles; they may alias.
 */
enum GendynStatus gendyn_shrink(const double *data,
                                size_t rows,
                                size_t cols,
                                double aspect,
                                double scale,
                                double margin,
                                double *out,
                                size_t *n_detected);

/**
 * Theory transfer benefit for two rank-1 tasks with input overlap `q`, unit
 * noise and a full-width student.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum GendynStatus gendyn_transfer_rank1(size_t n1,
                                        size_t n3,
                                        double snr_a,
                                        double snr_b,
                                        double q,
                                        double eps,
                                        uint32_t depth,
                                        uint64_t seed,
                                        struct GendynTransfer *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GENDYN_H */
