#ifndef BLOWUP_H
#define BLOWUP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum BlowupStatus {
  BLOWUP_STATUS_OK = 0,
  BLOWUP_STATUS_NULL_POINTER = 1,
  BLOWUP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The growth condition fails, so no large solution exists.
   */
  BLOWUP_STATUS_NO_LARGE_SOLUTION = 3,
  BLOWUP_STATUS_NUMERICAL = 4,
  BLOWUP_STATUS_OUT_OF_RANGE = 5,
  BLOWUP_STATUS_BUFFER_TOO_SMALL = 6,
  BLOWUP_STATUS_PANIC = 7,
} BlowupStatus;

/**
 * Tail model of `F` for expression nonlinearities.
 */
typedef enum BlowupTail {
  /**
   * `F(u) ~ amplitude·u^exponent`.
   */
  BLOWUP_TAIL_POWER = 0,
  /**
   * `F(u) ~ amplitude·e^(exponent·u)`.
   */
  BLOWUP_TAIL_EXPONENTIAL = 1,
  /**
   * No analytic model.
   */
  BLOWUP_TAIL_NUMERIC = 2,
} BlowupTail;

/**
 * Three-valued answer of the decision procedures.
 */
typedef enum BlowupVerdict {
  BLOWUP_VERDICT_YES = 0,
  BLOWUP_VERDICT_NO = 1,
  BLOWUP_VERDICT_INCONCLUSIVE = 2,
} BlowupVerdict;

/**
 * Opaque nonlinearity `f` with its antiderivative `F`.
 */
typedef struct BlowupNonlinearity BlowupNonlinearity;

/**
 * Opaque radial large solution normalised to blow up at `r = 1`.
 */
typedef struct BlowupSolution BlowupSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *blowup_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len − 1` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t blowup_last_error_message(char *buf, size_t len);

/**
 * `f(u) = u^p` for `u ≥ 0`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum BlowupStatus blowup_nonlinearity_power(double p, struct BlowupNonlinearity **out);

/**
 * `f(u) = e^u`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum BlowupStatus blowup_nonlinearity_exponential(struct BlowupNonlinearity **out);

/**
 * `f` from an expression in `u`, vanishing below `a`, with a tail model for
 * `F` beyond `cutoff`. `amplitude` and `exponent` are ignored for
 * `BLOWUP_TAIL_NUMERIC`.
 *
 * # Safety
 * `expr` must be a NUL-terminated string; `out` must be writable.
 */
enum BlowupStatus blowup_nonlinearity_expression(const char *expr,
                                                 double a,
                                                 enum BlowupTail tail,
                                                 double amplitude,
                                                 double exponent,
                                                 double cutoff,
                                                 struct BlowupNonlinearity **out);

/**
 * Releases a nonlinearity; null is ignored.
 *
 * # Safety
 * `nl` must come from a constructor above and not be used afterwards.
 */
void blowup_nonlinearity_free(struct BlowupNonlinearity *nl);

/**
 * `f(u)` and `F(u)`.
 *
 * # Safety
 * `nl` must be a live handle; `f_out` and `big_f_out` must be writable.
 */
enum BlowupStatus blowup_nonlinearity_eval(const struct BlowupNonlinearity *nl,
                                           double u,
                                           double *f_out,
                                           double *big_f_out);

/**
 * Whether `∫^∞ dt/√F` converges.
 *
 * # Safety
 * `nl` must be a live handle; `out` must be writable.
 */
enum BlowupStatus blowup_keller_osserman(const struct BlowupNonlinearity *nl,
                                         enum BlowupVerdict *out);

/**
 * Whether the boundary behaviour is the same for every large solution.
 *
 * # Safety
 * `nl` must be a live handle; `out` must be writable.
 */
enum BlowupStatus blowup_classify(const struct BlowupNonlinearity *nl, enum BlowupVerdict *out);

/**
 * Radial large solution in dimension `dim`, blow-up radius resolved to
 * `tol_radius`.
 *
 * # Safety
 * `nl` must be a live handle; `out` must be writable.
 */
enum BlowupStatus blowup_solve(const struct BlowupNonlinearity *nl,
                               size_t dim,
                               double tol_radius,
                               struct BlowupSolution **out);

/**
 * Releases a solution; null is ignored.
 *
 * # Safety
 * `sol` must come from [`blowup_solve`] and not be used afterwards.
 */
void blowup_solution_free(struct BlowupSolution *sol);

/**
 * `u(r)` for `0 ≤ r < 1`.
 *
 * # Safety
 * `sol` must be a live handle; `out` must be writable.
 */
enum BlowupStatus blowup_solution_u_at(const struct BlowupSolution *sol, double r, double *out);

/**
 * `u(0)`.
 *
 * # Safety
 * `sol` must be a live handle; `out` must be writable.
 */
enum BlowupStatus blowup_solution_center_value(const struct BlowupSolution *sol, double *out);

/**
 * Runs the profile iteration to its fixed point. `converged_at` receives
 * the iteration count at convergence, or 0 if `max_iters` was reached.
 *
 * # Safety
 * `nl` must be a live handle; `converged_at` and `residual` must be writable.
 */
enum BlowupStatus blowup_picard(const struct BlowupNonlinearity *nl,
                                size_t dim,
                                double rho,
                                double sup_tol,
                                size_t max_iters,
                                size_t *converged_at,
                                double *residual);

/**
 * Coefficients `a_0..=a_order` of `u = d^(−2/(p−1))·Σ a_k d^k` for `f = u^p`.
 *
 * The number of coefficients is stored in `written`. If `cap` is too small,
 * nothing is copied, `written` holds the required length and
 * `BLOWUP_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `coeffs` must point to `cap` writable doubles (or be null when `cap` is
 * 0); `written` must be writable.
 */
enum BlowupStatus blowup_power_expansion(double p,
                                         size_t dim,
                                         size_t order,
                                         double *coeffs,
                                         size_t cap,
                                         size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLOWUP_H */
