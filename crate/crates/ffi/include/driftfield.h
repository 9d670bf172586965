#ifndef DRIFTFIELD_H
#define DRIFTFIELD_H

/* Generated by cbindgen from driftfield-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum {
  /**
   * The call succeeded and all out parameters are filled in.
   */
  DF_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DF_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument failed validation; see `df_last_error_message`.
   */
  DF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A file could not be read or written.
   */
  DF_STATUS_IO = 3,
  /**
   * A file exists but does not parse as the expected format.
   */
  DF_STATUS_FORMAT = 4,
  /**
   * An iterative solver exhausted its budget before converging.
   */
  DF_STATUS_CONVERGENCE = 5,
  /**
   * An internal invariant failed; state may be inconsistent.
   */
  DF_STATUS_PANIC = 6,
} DfStatus;

/**
 * Grid wrap-around behavior.
 */
typedef enum {
  /**
   * Both axes wrap; every node has eight neighbors.
   */
  DF_TOPOLOGY_TOROID = 0,
  /**
   * Hard edges; border nodes have fewer neighbors.
   */
  DF_TOPOLOGY_PLANAR = 1,
} DfTopology;

/**
 * Codebook seeding strategy for training.
 */
typedef enum {
  /**
   * Spread nodes over the data's top-2 principal plane.
   */
  DF_INIT_PCA = 0,
  /**
   * Draw each node uniformly inside the data's bounding box.
   */
  DF_INIT_RANDOM = 1,
} DfInit;

/**
 * A trained self-organizing map: grid layout plus one weight vector per
 * node. Opaque; create with `df_codebook_train` or `df_codebook_load` and
 * release with `df_codebook_free`.
 */
typedef struct DfCodebook DfCodebook;

/**
 * Linear training schedule: radius interpolates `radius_start ->
 * radius_end` and learning rate `rate_start -> rate_end` across `epochs`
 * full passes. The neighborhood kernel is Gaussian, truncated at three
 * sigma. Constraints: `radius_start >= radius_end >= 1` and
 * `rate_start >= rate_end >= 0`.
 */
typedef struct {
  size_t epochs;
  double radius_start;
  double radius_end;
  double rate_start;
  double rate_end;
} DfSchedule;

/**
 * One grid position: column, then row, both zero-based.
 */
typedef struct {
  size_t col;
  size_t row;
} DfGridCoord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static, nul-terminated string.
 */
const char *df_version(void);

/**
 * Message for the calling thread's most recent failure, or an empty string
 * when nothing failed yet. Valid until this thread's next failing call.
 */
const char *df_last_error_message(void);

/**
 * Trains a fresh map on row-major `rows x dim` data and writes a handle to
 * `out`. The same arguments and seed always produce the same map,
 * regardless of thread count.
 *
 * # Safety
 * `data` must point to `rows * dim` doubles; `schedule` and `out` must be
 * valid for reads and writes respectively.
 */
DfStatus df_codebook_train(size_t width,
                           size_t height,
                           DfTopology topology,
                           const double *data,
                           size_t rows,
                           size_t dim,
                           const DfSchedule *schedule,
                           DfInit init,
                           uint64_t seed,
                           DfCodebook **out);

/**
 * Releases a handle returned by this library. Null is a no-op.
 *
 * # Safety
 * `cb` must be a pointer previously returned through a `DfCodebook**` out
 * parameter, not yet freed.
 */
void df_codebook_free(DfCodebook *cb);

/**
 * Grid width in nodes; 0 if the handle is null.
 *
 * # Safety
 * `cb` must be a live handle or null.
 */
size_t df_codebook_width(const DfCodebook *cb);

/**
 * Grid height in nodes; 0 if the handle is null.
 *
 * # Safety
 * `cb` must be a live handle or null.
 */
size_t df_codebook_height(const DfCodebook *cb);

/**
 * Weight-vector dimensionality; 0 if the handle is null.
 *
 * # Safety
 * `cb` must be a live handle or null.
 */
size_t df_codebook_dim(const DfCodebook *cb);

/**
 * Copies every node weight into `out`, ordered node by node (row-major
 * grid order), `dim` values each. `len` must equal width * height * dim.
 *
 * # Safety
 * `cb` must be a live handle; `out` must point to `len` doubles.
 */
DfStatus df_codebook_weights(const DfCodebook *cb, double *out, size_t len);

/**
 * Writes the codebook to `path` in the library's binary format.
 *
 * # Safety
 * `cb` must be a live handle; `path` must be a nul-terminated string.
 */
DfStatus df_codebook_save(const DfCodebook *cb, const char *path);

/**
 * Loads a codebook previously written by `df_codebook_save`.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
DfStatus df_codebook_load(const char *path, DfCodebook **out);

/**
 * Best-matching unit of one vector: the node with minimal Euclidean
 * distance, exact ties going to the smallest (row, col).
 *
 * # Safety
 * `cb` must be a live handle; `vector` must point to `dim` doubles;
 * `out_col` and `out_row` must be writable.
 */
DfStatus df_codebook_bmu(const DfCodebook *cb,
                         const double *vector,
                         size_t dim,
                         size_t *out_col,
                         size_t *out_row);

/**
 * Mean distance from each node's weights to its grid neighbors, row-major.
 * `len` must equal width * height.
 *
 * # Safety
 * `cb` must be a live handle; `out` must point to `len` doubles.
 */
DfStatus df_codebook_umatrix(const DfCodebook *cb, double *out, size_t len);

/**
 * Mean distance from each of the `rows` vectors to its best-matching node.
 *
 * # Safety
 * `cb` must be a live handle; `data` must point to `rows * dim` doubles;
 * `out` must be writable.
 */
DfStatus df_codebook_quantization_error(const DfCodebook *cb,
                                        const double *data,
                                        size_t rows,
                                        size_t dim,
                                        double *out);

/**
 * PageRank over a symmetric, non-negative `n x n` co-occurrence matrix
 * (row-major; the diagonal is ignored). Writes `n` scores summing to one.
 *
 * # Safety
 * `weights` must point to `n * n` doubles; `out_scores` to `n`.
 */
DfStatus df_pagerank(const double *weights,
                     size_t n,
                     double damping,
                     double tolerance,
                     size_t max_iter,
                     double *out_scores);

/**
 * Split and merge counts between two aligned BMU assignments (`before[i]`
 * and `after[i]` locate the same item), plus the percentage of items
 * participating in either kind of event.
 *
 * # Safety
 * `before` and `after` must each point to `n` coordinates; the three out
 * pointers must be writable.
 */
DfStatus df_drift_counts(const DfGridCoord *before,
                         const DfGridCoord *after,
                         size_t n,
                         size_t width,
                         size_t height,
                         DfTopology topology,
                         size_t *out_splits,
                         size_t *out_merges,
                         double *out_rate_percent);

/**
 * Attractive potential at every grid node from point masses sitting at
 * `coords`: sum of -mass / (d + epsilon) with grid distance d normalized
 * by the grid diagonal. Writes width * height values, row-major; `len`
 * must match.
 *
 * # Safety
 * `coords` and `masses` must each point to `n` elements; `out_values` to
 * `len` doubles.
 */
DfStatus df_potential_surface(const DfGridCoord *coords,
                              const double *masses,
                              size_t n,
                              size_t width,
                              size_t height,
                              DfTopology topology,
                              double epsilon,
                              double *out_values,
                              size_t len);

/**
 * Negative finite-difference gradient of a potential surface, as
 * interleaved (column, row) components per node: `out_vectors` holds
 * `2 * width * height` doubles and `len` must match. Central differences,
 * wrapping on toroids, one-sided at planar edges.
 *
 * # Safety
 * `values` must point to `width * height` doubles; `out_vectors` to `len`.
 */
DfStatus df_force_field(const double *values,
                        size_t width,
                        size_t height,
                        DfTopology topology,
                        double *out_vectors,
                        size_t len);

/**
 * Softened attraction m1 * m2 / (r + epsilon)^2.
 */
double df_softened_force(double m1, double m2, double r, double epsilon);

/**
 * Softened potential -m1 * m2 / (r + epsilon).
 */
double df_softened_potential(double m1, double m2, double r, double epsilon);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRIFTFIELD_H */
