/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef INDEXLAB_H
#define INDEXLAB_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. `IX_OK` is zero; everything else is a failure.
 */
typedef enum IxStatus {
  IX_OK = 0,
  IX_NULL_POINTER = 1,
  IX_INVALID_INPUT = 2,
  IX_PARSE = 3,
  IX_NOT_ELLIPTIC = 4,
  IX_NOT_INVERTIBLE_ON_BOUNDARY = 5,
  /**
   * The estimate is still written to the output handle.
   */
  IX_INDEX_UNSTABLE = 6,
  IX_CALIBRATION_REQUIRED = 7,
  IX_CALIBRATION_FAILURE = 8,
  IX_KERNEL_FAILURE = 9,
  IX_NUMERICAL = 10,
  IX_IO = 11,
  IX_PANIC = 12,
} IxStatus;

/**
 * Orientation calibration store.
 */
typedef struct IxCalibration IxCalibration;

/**
 * Numerical Toeplitz index estimate.
 */
typedef struct IxIndexEstimate IxIndexEstimate;

/**
 * Differential operator on the unit disc or interval.
 */
typedef struct IxOperator IxOperator;

/**
 * Matrix-valued polynomial symbol `α(z, z̄)`.
 */
typedef struct IxSymbol IxSymbol;

typedef struct IxComplex {
  double re;
  double im;
} IxComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ix_version(void);

/**
 * Copy the last error message of this thread into `buf` (truncated,
 * NUL-terminated). Returns the full message length without the NUL.
 */
size_t ix_last_error(char *buf, size_t cap);

/**
 * Built-in operator by name: `cr`, `dbar<m>`, `laplacian`, `bilaplacian`, `wave`.
 */
enum IxStatus ix_operator_builtin(const char *name, struct IxOperator **out);

/**
 * Operator from the TOML spec format.
 */
enum IxStatus ix_operator_parse(const char *toml, struct IxOperator **out);

/**
 * Add the lower-order term `m · D^{(a,b)}`; `m` is `rank × rank`, row-major.
 */
enum IxStatus ix_operator_perturb(struct IxOperator *op,
                                  uint32_t a,
                                  uint32_t b,
                                  const struct IxComplex *m,
                                  size_t len);

size_t ix_operator_order(const struct IxOperator *op);

size_t ix_operator_rank(const struct IxOperator *op);

void ix_operator_free(struct IxOperator *op);

/**
 * Zero `size × size` symbol.
 */
enum IxStatus ix_symbol_new(size_t size, struct IxSymbol **out);

/**
 * Add `m z^a z̄^b`; `m` is `size × size`, row-major.
 */
enum IxStatus ix_symbol_add_term(struct IxSymbol *sym,
                                 uint32_t a,
                                 uint32_t b,
                                 const struct IxComplex *m,
                                 size_t len);

/**
 * Symbol from the TOML symbol format.
 */
enum IxStatus ix_symbol_parse(const char *toml, struct IxSymbol **out);

/**
 * Evaluate at `z`; writes `size²` entries row-major into `out`.
 */
enum IxStatus ix_symbol_eval(const struct IxSymbol *sym,
                             struct IxComplex z,
                             struct IxComplex *out,
                             size_t cap);

void ix_symbol_free(struct IxSymbol *sym);

/**
 * Smallest distance of a boundary-symbol root from the real axis over a
 * grid of `points` boundary points per fiber component.
 */
enum IxStatus ix_ellipticity_margin(const struct IxOperator *op, size_t points, double *margin);

/**
 * Largest disagreement between the two Calderón symbol routes, and the
 * ranks of `E₊` on the two fiber components.
 */
enum IxStatus ix_calderon_check(const struct IxOperator *op,
                                size_t points,
                                double *disagreement,
                                size_t *ranks);

/**
 * Numerical index of `P α P` over a truncation schedule (`len == 0` uses
 * the default). On `IxIndexUnstable` the estimate is still returned.
 */
enum IxStatus ix_numerical_index(const struct IxOperator *op,
                                 const struct IxSymbol *sym,
                                 const size_t *schedule,
                                 size_t len,
                                 struct IxIndexEstimate **out);

int64_t ix_index_value(const struct IxIndexEstimate *est);

enum IxStatus ix_index_dims(const struct IxIndexEstimate *est, size_t *dim_ker, size_t *dim_coker);

bool ix_index_stabilized(const struct IxIndexEstimate *est);

bool ix_index_confident(const struct IxIndexEstimate *est);

double ix_index_gap_ratio(const struct IxIndexEstimate *est);

void ix_index_estimate_free(struct IxIndexEstimate *est);

/**
 * Fix the orientation signs against the reference case.
 */
enum IxStatus ix_calibrate(const size_t *schedule, size_t len, struct IxCalibration **out);

enum IxStatus ix_calibration_load(const char *path, struct IxCalibration **out);

enum IxStatus ix_calibration_save(const struct IxCalibration *cal, const char *path);

/**
 * Orientation signs for the `ξ' > 0` and `ξ' < 0` components.
 */
enum IxStatus ix_calibration_signs(const struct IxCalibration *cal, int64_t *plus, int64_t *minus);

void ix_calibration_free(struct IxCalibration *cal);

/**
 * Winding-number index `Σ s_σ · rank E₊,σ · wind det α`.
 */
enum IxStatus ix_topological_index(const struct IxOperator *op,
                                   const struct IxSymbol *sym,
                                   const struct IxCalibration *cal,
                                   int64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INDEXLAB_H */
