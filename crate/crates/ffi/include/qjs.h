#ifndef QJS_H
#define QJS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QjsStatus {
  QJS_STATUS_OK = 0,
  QJS_STATUS_NULL_POINTER = 1,
  QJS_STATUS_DOMAIN = 2,
  QJS_STATUS_BIAS_OFF = 3,
  QJS_STATUS_NOISELESS = 4,
  QJS_STATUS_NO_CLICK_POSSIBLE = 5,
  QJS_STATUS_RESOLUTION_TOO_COARSE = 6,
  QJS_STATUS_QUADRATURE_NON_CONVERGENCE = 7,
  QJS_STATUS_STEPPER_FAILURE = 8,
  QJS_STATUS_UNSUPPORTED = 9,
  QJS_STATUS_TRUNCATION_OVERFLOW = 10,
  QJS_STATUS_NO_PLATEAU = 11,
  QJS_STATUS_RESIDUE = 12,
  QJS_STATUS_CONFIG = 13,
  QJS_STATUS_IO = 14,
  QJS_STATUS_PANIC = 15,
} QjsStatus;

/**
 * Detector parameters.
 */
typedef struct QjsParams QjsParams;

/**
 * Diagonal photon-number distribution.
 */
typedef struct QjsState QjsState;

/**
 * Coefficient tables `bright[n]`, `dark[n]`, `emission[n]`.
 */
typedef struct QjsTable QjsTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *qjs_last_error_message(void);

/**
 * Parameters from wavelengths in metres and `g` in rad/s.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum QjsStatus qjs_params_new_wavelengths(double g,
                                          double lambda0,
                                          double lambda,
                                          double b,
                                          double tau,
                                          double nbar,
                                          struct QjsParams **out);

/**
 * Dimensionless parameters from the detuning `q` (`g = 1`).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum QjsStatus qjs_params_new_detuning(double q,
                                       double b,
                                       double tau,
                                       double nbar,
                                       struct QjsParams **out);

/**
 * # Safety
 * `params` must come from a `qjs_params_new_*` call and not be used afterwards.
 */
void qjs_params_free(struct QjsParams *params);

/**
 * Bright rate `J_1^(B)`, dark rate `J_0^(D)` (units of `g`) and their ratio.
 *
 * # Safety
 * `params` must be a live handle; the outputs must be valid pointers.
 */
enum QjsStatus qjs_counting_rates(const struct QjsParams *params,
                                  double *r_b,
                                  double *r_d,
                                  double *s);

/**
 * Bright coefficient `J_n^(B)`, units of `g`.
 *
 * # Safety
 * `params` must be a live handle; `out` a valid pointer.
 */
enum QjsStatus qjs_bright_coeff(const struct QjsParams *params, size_t n, double *out);

/**
 * Dark coefficient `J_n^(D)`, units of `g`.
 *
 * # Safety
 * `params` must be a live handle; `out` a valid pointer.
 */
enum QjsStatus qjs_dark_coeff(const struct QjsParams *params, size_t n, double *out);

/**
 * Coefficient tables for `n = 0..=n_max`. With `with_emission` nonzero the
 * emission term is integrated to relative tolerance `quad_tol`.
 *
 * # Safety
 * `params` must be a live handle; `out` a valid pointer.
 */
enum QjsStatus qjs_table_new(const struct QjsParams *params,
                             size_t n_max,
                             int32_t with_emission,
                             double quad_tol,
                             struct QjsTable **out);

/**
 * # Safety
 * `table` must come from `qjs_table_new` and not be used afterwards.
 */
void qjs_table_free(struct QjsTable *table);

/**
 * Number of rows, `n_max + 1`; 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live handle.
 */
size_t qjs_table_len(const struct QjsTable *table);

/**
 * Row `n` of the table. Any output pointer may be null to skip it.
 *
 * # Safety
 * `table` must be a live handle; non-null outputs must be valid pointers.
 */
enum QjsStatus qjs_table_get(const struct QjsTable *table,
                             size_t n,
                             double *bright,
                             double *dark,
                             double *emission);

/**
 * Thermal distribution with the given mean on `n_max + 1` levels.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QjsStatus qjs_state_new_thermal(double mean, size_t n_max, struct QjsState **out);

/**
 * Distribution from `len` non-negative weights, normalized on input.
 *
 * # Safety
 * `weights` must point to `len` readable doubles; `out` must be valid.
 */
enum QjsStatus qjs_state_new_weights(const double *weights, size_t len, struct QjsState **out);

/**
 * # Safety
 * `state` must come from a `qjs_state_new_*` or `qjs_apply_jump` call and
 * not be used afterwards.
 */
void qjs_state_free(struct QjsState *state);

/**
 * Number of photon-number levels; 0 for a null handle.
 *
 * # Safety
 * `state` must be null or a live handle.
 */
size_t qjs_state_len(const struct QjsState *state);

/**
 * Copies `min(len, qjs_state_len(state))` probabilities into `buf`.
 *
 * # Safety
 * `state` must be a live handle and `buf` must hold `len` doubles.
 */
enum QjsStatus qjs_state_copy(const struct QjsState *state, double *buf, size_t len);

/**
 * Post-click state and click rate `Tr[J rho]` (units of `g`). A nonzero
 * `absorb` drops emission weight pushed past the truncation.
 *
 * # Safety
 * `state` and `table` must be live handles; `out` and `rate` valid pointers.
 */
enum QjsStatus qjs_apply_jump(const struct QjsState *state,
                              const struct QjsTable *table,
                              int32_t absorb,
                              struct QjsState **out,
                              double *rate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QJS_H */
