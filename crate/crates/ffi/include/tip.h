#ifndef TIP_H
#define TIP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum TipStatus {
  TIP_STATUS_OK = 0,
  TIP_STATUS_NULL_POINTER = 1,
  TIP_STATUS_DOMAIN = 2,
  TIP_STATUS_INVALID_PARAMETER = 3,
  TIP_STATUS_MALFORMED_TRAJECTORY = 4,
  TIP_STATUS_NON_CONVERGENCE = 5,
  TIP_STATUS_NON_FINITE = 6,
  TIP_STATUS_INSUFFICIENT_DATA = 7,
  TIP_STATUS_OUT_OF_RANGE = 8,
  TIP_STATUS_PANIC = 9,
  TIP_STATUS_OTHER = 10,
} TipStatus;

/**
 * Opaque result of a maximum-likelihood fit.
 */
typedef struct TipFitResult TipFitResult;

/**
 * Opaque trajectory for one (human, robot) pair.
 */
typedef struct TipTrajectory TipTrajectory;

/**
 * Six-parameter vector (α₀, β₀, s, f, ŝ, f̂).
 */
typedef struct TipParams {
  double alpha0;
  double beta0;
  double s;
  double f;
  double s_hat;
  double f_hat;
} TipParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *tip_last_error(void);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum TipStatus tip_log_gamma(double x, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum TipStatus tip_digamma(double x, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum TipStatus tip_beta_log_pdf(double t, double alpha, double beta, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum TipStatus tip_beta_cdf(double t, double alpha, double beta, double *out);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum TipStatus tip_beta_quantile(double q, double alpha, double beta, double *out);

/**
 * Long-run expected trust under constant performance.
 *
 * # Safety
 * `params` must point to a valid `TipParams`; `out` must be valid for writes.
 */
enum TipStatus tip_asymptotic_trust(const struct TipParams *params,
                                    double perf_success,
                                    double perf_failure,
                                    double *out);

/**
 * Starts a trajectory with the initial trust rating.
 *
 * # Safety
 * `human_id` and `robot_id` must be NUL-terminated strings; `out` must be valid for writes.
 */
enum TipStatus tip_trajectory_new(const char *human_id,
                                  const char *robot_id,
                                  double initial_trust,
                                  struct TipTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a handle from [`tip_trajectory_new`] not yet freed.
 */
void tip_trajectory_free(struct TipTrajectory *traj);

/**
 * Appends a direct experience. `reported_trust` is NaN when no rating was given.
 *
 * # Safety
 * `traj` must be a live trajectory handle.
 */
enum TipStatus tip_trajectory_push_direct(struct TipTrajectory *traj,
                                          uint32_t session,
                                          double perf_success,
                                          double perf_failure,
                                          double reported_trust);

/**
 * Appends an indirect experience relayed by a teammate. `reported_trust` is NaN
 * when no rating was given.
 *
 * # Safety
 * `traj` must be a live trajectory handle.
 */
enum TipStatus tip_trajectory_push_indirect(struct TipTrajectory *traj,
                                            uint32_t session,
                                            double trust_in_teammate,
                                            double teammate_trust,
                                            double reported_trust);

/**
 * Number of events, including the initial rating.
 *
 * # Safety
 * `traj` must be a live trajectory handle; `out` must be valid for writes.
 */
enum TipStatus tip_trajectory_len(const struct TipTrajectory *traj, size_t *out);

/**
 * Writes the expected trust after every event into `out[0..len]`, where `len`
 * must equal the trajectory length.
 *
 * # Safety
 * `traj` and `params` must be valid; `out` must hold `len` doubles.
 */
enum TipStatus tip_replay_expected_trust(const struct TipTrajectory *traj,
                                         const struct TipParams *params,
                                         double *out,
                                         size_t len);

/**
 * # Safety
 * `traj` and `params` must be valid; `out` must be valid for writes.
 */
enum TipStatus tip_log_likelihood(const struct TipTrajectory *traj,
                                  const struct TipParams *params,
                                  double *out);

/**
 * Gradient of the log-likelihood, in the field order of [`TipParams`].
 *
 * # Safety
 * `traj` and `params` must be valid; `out` must be valid for writes.
 */
enum TipStatus tip_gradient(const struct TipTrajectory *traj,
                            const struct TipParams *params,
                            struct TipParams *out);

/**
 * Fits all six parameters (`direct_only` false) or the direct-only baseline.
 * Pass 0 for `max_iterations` or a non-positive `tolerance` to use the defaults.
 *
 * # Safety
 * `traj` must be valid; `out` must be valid for writes.
 */
enum TipStatus tip_fit(const struct TipTrajectory *traj,
                       bool direct_only,
                       size_t max_iterations,
                       double tolerance,
                       struct TipFitResult **out);

/**
 * # Safety
 * `fit` must be null or a handle from [`tip_fit`] not yet freed.
 */
void tip_fit_free(struct TipFitResult *fit);

/**
 * # Safety
 * `fit` must be a live fit handle; `out` must be valid for writes.
 */
enum TipStatus tip_fit_params(const struct TipFitResult *fit, struct TipParams *out);

/**
 * # Safety
 * `fit` must be a live fit handle; `out` must be valid for writes.
 */
enum TipStatus tip_fit_log_likelihood(const struct TipFitResult *fit, double *out);

/**
 * Mean absolute difference between expected and reported trust.
 *
 * # Safety
 * `fit` must be a live fit handle; `out` must be valid for writes.
 */
enum TipStatus tip_fit_mean_error(const struct TipFitResult *fit, double *out);

/**
 * # Safety
 * `fit` must be a live fit handle; `converged` and `iterations` must be valid for writes.
 */
enum TipStatus tip_fit_convergence(const struct TipFitResult *fit,
                                   bool *converged,
                                   size_t *iterations);

/**
 * Copies the fitted expected-trust curve into `out[0..len]`; `len` must equal
 * the trajectory length.
 *
 * # Safety
 * `fit` must be a live fit handle; `out` must hold `len` doubles.
 */
enum TipStatus tip_fit_expected_trust(const struct TipFitResult *fit, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TIP_H */
