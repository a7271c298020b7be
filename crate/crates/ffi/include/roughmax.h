#ifndef ROUGHMAX_H
#define ROUGHMAX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which cube family a supremum runs over.
 */
typedef enum RmFamily {
  /**
   * All shifted dyadic grids.
   */
  RM_FAMILY_DYADIC_UNION = 0,
  /**
   * One dyadic grid; the shift mask is passed separately.
   */
  RM_FAMILY_DYADIC = 1,
  /**
   * Every cell-aligned cube inside the box.
   */
  RM_FAMILY_ALL_CUBES = 2,
} RmFamily;

/**
 * Result codes. Zero is success.
 */
typedef enum RmStatus {
  RM_STATUS_OK = 0,
  RM_STATUS_NULL_POINTER = 1,
  RM_STATUS_DOMAIN = 2,
  RM_STATUS_PARAMETER = 3,
  RM_STATUS_HYPOTHESIS = 4,
  RM_STATUS_RANGE = 5,
  RM_STATUS_RESOURCE = 6,
  RM_STATUS_SINGULAR = 7,
  RM_STATUS_DIVERGENT = 8,
  RM_STATUS_INCONSISTENCY = 9,
  RM_STATUS_FORMAT = 10,
  RM_STATUS_IO = 11,
  RM_STATUS_PANIC = 12,
  RM_STATUS_BUFFER_TOO_SMALL = 13,
} RmStatus;

/**
 * Opaque per-cell field.
 */
typedef struct RmField RmField;

/**
 * Opaque handle to `m` sampled functions with unit weights.
 */
typedef struct RmFunctions RmFunctions;

/**
 * Opaque grid handle.
 */
typedef struct RmGrid RmGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated)
 * and stores its length, without the terminator, in `len_out`.
 */
enum RmStatus rm_last_error_message(char *buf, size_t cap, size_t *len_out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rm_version(void);

/**
 * Box `[0, 2^domain_exp)^n` with `3 * 2^(domain_exp + level)` cells per side.
 */
enum RmStatus rm_grid_new(size_t n, uint32_t domain_exp, uint32_t level, struct RmGrid **out);

void rm_grid_free(struct RmGrid *grid);

/**
 * Number of cells, or 0 for a null handle.
 */
size_t rm_grid_cell_count(const struct RmGrid *grid);

/**
 * `m` nonnegative functions; `values` holds `m * cell_count` numbers, one
 * function after another, each in row-major cell order.
 */
enum RmStatus rm_functions_new(const struct RmGrid *grid,
                               size_t m,
                               const double *values,
                               struct RmFunctions **out);

void rm_functions_free(struct RmFunctions *fs);

/**
 * `M_alpha` over the chosen family (`beta` is used by `RM_FAMILY_DYADIC`).
 */
enum RmStatus rm_maximal_alpha(const struct RmFunctions *fs,
                               double alpha,
                               enum RmFamily kind,
                               uint8_t beta,
                               struct RmField **out);

size_t rm_field_len(const struct RmField *field);

/**
 * Copies the field's values into `buf`, which must hold `rm_field_len` values.
 */
enum RmStatus rm_field_copy(const struct RmField *field, double *buf, size_t cap);

void rm_field_free(struct RmField *field);

/**
 * Largest ratio `M_alpha / (6^(mn-alpha) sum_beta M_alpha^{D_beta})` over the
 * cells. Grids above `budget_cells` cells are refused.
 */
enum RmStatus rm_shift_domination(const struct RmFunctions *fs,
                                  double alpha,
                                  size_t budget_cells,
                                  double *worst_ratio);

/**
 * Builds the sparse family of `D_beta` (`base <= 0` selects `2^(m(n+1))`)
 * and verifies it. Reports the cube count and the verdict.
 */
enum RmStatus rm_sparse_verify(const struct RmFunctions *fs,
                               double alpha,
                               uint8_t beta,
                               double base,
                               size_t *cubes,
                               bool *passed);

/**
 * Fitted weight exponent on the one-dimensional extremal family for
 * exponents `p[0..m]`, over `count` decreasing values `eps`.
 */
enum RmStatus rm_sharpness(size_t m,
                           const double *p,
                           double alpha,
                           const double *eps,
                           size_t count,
                           double *gamma_hat);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROUGHMAX_H */
