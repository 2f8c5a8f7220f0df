#ifndef PACINV_H
#define PACINV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible function.
 */
typedef enum PacinvStatus {
  PACINV_STATUS_OK = 0,
  PACINV_STATUS_NULL_POINTER = 1,
  PACINV_STATUS_INVALID_ARGUMENT = 2,
  PACINV_STATUS_PARSE = 3,
  PACINV_STATUS_CYCLE = 4,
  PACINV_STATUS_TARGET_INTERVENED = 5,
  PACINV_STATUS_INDEX_OUT_OF_RANGE = 6,
  PACINV_STATUS_DIMENSION_MISMATCH = 7,
  PACINV_STATUS_INSUFFICIENT_SAMPLES = 8,
  PACINV_STATUS_ZERO_HEAD = 9,
  PACINV_STATUS_VALIDATION = 10,
  PACINV_STATUS_IO = 11,
  PACINV_STATUS_PANIC = 12,
} PacinvStatus;

/**
 * Selects the interventional budget formula.
 */
typedef enum PacinvBudgetKind {
  PACINV_BUDGET_KIND_HARD_K = 0,
  PACINV_BUDGET_KIND_SOFT_K_DEGREE_D = 1,
  PACINV_BUDGET_KIND_GENERAL = 2,
} PacinvBudgetKind;

/**
 * Opaque sampled dataset.
 */
typedef struct PacinvDataset PacinvDataset;

/**
 * Opaque linear SEM.
 */
typedef struct PacinvSem PacinvSem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *pacinv_last_error(void);

/**
 * Parses a SEM from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out_sem` a writable pointer.
 */
enum PacinvStatus pacinv_sem_from_toml(const char *toml, struct PacinvSem **out_sem);

/**
 * # Safety
 * `sem` must be null or a handle returned by this library, freed once.
 */
void pacinv_sem_free(struct PacinvSem *sem);

/**
 * Number of covariates, or 0 for a null handle.
 *
 * # Safety
 * `sem` must be null or a live handle.
 */
size_t pacinv_sem_num_covariates(const struct PacinvSem *sem);

/**
 * Applies a hard intervention fixing `vars[i]` to `values[i]`.
 *
 * # Safety
 * `vars` and `values` must hold `len` elements; `out_sem` must be writable.
 */
enum PacinvStatus pacinv_sem_apply_hard(const struct PacinvSem *sem,
                                        const size_t *vars,
                                        const double *values,
                                        size_t len,
                                        struct PacinvSem **out_sem);

/**
 * Population gradient of the invariance penalty for a diagonal
 * representation and head, both of length `n`. Writes `n` values to `grad`.
 *
 * # Safety
 * `phi`, `head` and `grad` must hold `n` elements.
 */
enum PacinvStatus pacinv_population_gradient(const struct PacinvSem *sem,
                                             const double *phi,
                                             const double *head,
                                             size_t n,
                                             double *grad);

/**
 * # Safety
 * `phi` and `head` must hold `n` elements; `out_flag` must be writable.
 */
enum PacinvStatus pacinv_is_eps_invariant(const struct PacinvSem *sem,
                                          const double *phi,
                                          const double *head,
                                          size_t n,
                                          double eps,
                                          bool *out_flag);

/**
 * Draws `n_samples` rows from the model.
 *
 * # Safety
 * `out_data` must be writable.
 */
enum PacinvStatus pacinv_sample_dataset(const struct PacinvSem *sem,
                                        size_t n_samples,
                                        uint64_t seed,
                                        struct PacinvDataset **out_data);

/**
 * # Safety
 * `data` must be null or a handle returned by this library, freed once.
 */
void pacinv_dataset_free(struct PacinvDataset *data);

/**
 * # Safety
 * `data` must be null or a live handle.
 */
size_t pacinv_dataset_rows(const struct PacinvDataset *data);

/**
 * Number of columns including the target.
 *
 * # Safety
 * `data` must be null or a live handle.
 */
size_t pacinv_dataset_vars(const struct PacinvDataset *data);

/**
 * Copies the samples in row-major order into `buf`, which must hold
 * `rows * vars` values.
 *
 * # Safety
 * `buf` must hold `len` elements.
 */
enum PacinvStatus pacinv_dataset_copy(const struct PacinvDataset *data, double *buf, size_t len);

/**
 * Least-squares head on the representation `phi` (length `n`).
 *
 * # Safety
 * `phi` and `head` must hold `n` elements.
 */
enum PacinvStatus pacinv_least_squares_head(const struct PacinvDataset *data,
                                            const double *phi,
                                            size_t n,
                                            double *head);

/**
 * Sample-split estimate of the gradient norm.
 *
 * # Safety
 * `phi` and `head` must hold `n` elements; `out_norm` must be writable.
 */
enum PacinvStatus pacinv_split_gradient_norm(const struct PacinvDataset *data,
                                             const double *phi,
                                             const double *head,
                                             size_t n,
                                             double *out_norm);

/**
 * Number of training interventions. `n`, `k` and `d` are read according to
 * `kind`.
 *
 * # Safety
 * `out_m` must be writable.
 */
enum PacinvStatus pacinv_interventional_complexity(enum PacinvBudgetKind kind,
                                                   uint64_t n,
                                                   uint64_t k,
                                                   uint64_t d,
                                                   double delta,
                                                   double delta_prime,
                                                   double c,
                                                   uint64_t *out_m);

/**
 * Samples per dataset.
 *
 * # Safety
 * `out_n` must be writable.
 */
enum PacinvStatus pacinv_sample_complexity(uint64_t n,
                                           double l,
                                           double eps,
                                           double delta,
                                           uint64_t m,
                                           double c,
                                           uint64_t *out_n);

/**
 * Log of the covering number of diagonal representations.
 *
 * # Safety
 * `out_log` must be writable.
 */
enum PacinvStatus pacinv_covering_number_log(uint64_t n, double eps, double *out_log);

/**
 * Spread statistic over `count` heads of length `n`, stored row by row in
 * `heads`.
 *
 * # Safety
 * `heads` must hold `count * n` elements; `out_rho` must be writable.
 */
enum PacinvStatus pacinv_rho_statistic(const double *heads,
                                       size_t count,
                                       size_t n,
                                       double *out_rho);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PACINV_H */
