#ifndef ICLUST_H
#define ICLUST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Search algorithm selector.
typedef enum IclustAlgorithm {
  ICLUST_ALGORITHM_HYBRID = 0,
  ICLUST_ALGORITHM_GENETIC = 1,
  ICLUST_ALGORITHM_MULTISTART = 2,
} IclustAlgorithm;

// Result of every fallible call.
typedef enum IclustStatus {
  ICLUST_STATUS_OK = 0,
  ICLUST_STATUS_NULL_POINTER = 1,
  ICLUST_STATUS_INVALID_UTF8 = 2,
  // Input data malformed or inconsistent with the model.
  ICLUST_STATUS_DATA = 3,
  // Option or hyperparameter out of range, or an argument outside its domain.
  ICLUST_STATUS_CONFIG = 4,
  ICLUST_STATUS_NUMERICAL = 5,
  ICLUST_STATUS_IO = 6,
  ICLUST_STATUS_JSON = 7,
  // Caller buffer too small; the required length is written back.
  ICLUST_STATUS_BUFFER_TOO_SMALL = 8,
  ICLUST_STATUS_PANIC = 9,
} IclustStatus;

// Opaque dataset with the model kind chosen for it.
typedef struct IclustDataset IclustDataset;

// Opaque fitted clustering.
typedef struct IclustFit IclustFit;

// Fit settings; obtain defaults from [`iclust_fit_options_default`].
typedef struct IclustFitOptions {
  enum IclustAlgorithm algorithm;
  // Dirichlet concentration on cluster proportions.
  double alpha;
  // Clusters in each initial partition.
  size_t k_init;
  uint64_t seed;
  // Worker threads; 0 uses one per core. Results do not depend on it.
  size_t threads;
  size_t pop_size;
  size_t nb_max_gen;
  double prob_mutation;
  size_t k_max;
  size_t nb_start;
} IclustFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Valid until the
// next failing call on the same thread.
const char *iclust_last_error(void);

// Library version as a static string.
const char *iclust_version(void);

struct IclustFitOptions iclust_fit_options_default(void);

// Reads a file in any supported format. `model` is null for automatic
// detection or one of `sbm`, `gmm`, `diag_gmm`, `lca`, `mom`.
//
// # Safety
// `path` and `model` are null or nul-terminated; `out` is writable.
enum IclustStatus iclust_dataset_load(const char *path,
                                      const char *model,
                                      struct IclustDataset **out);

// Graph on `n` nodes from `m` edges `src[e] -> dst[e]`.
//
// # Safety
// `src` and `dst` hold `m` elements; `out` is writable.
enum IclustStatus iclust_dataset_from_edges(size_t n,
                                            const uint32_t *src,
                                            const uint32_t *dst,
                                            size_t m,
                                            bool directed,
                                            struct IclustDataset **out);

// Real-valued `n × p` table, row-major.
//
// # Safety
// `values` holds `n * p` elements; `out` is writable.
enum IclustStatus iclust_dataset_from_continuous(size_t n,
                                                 size_t p,
                                                 const double *values,
                                                 struct IclustDataset **out);

// Categorical `n × p` table of codes, row-major; column `j` takes values
// in `0..arities[j]`.
//
// # Safety
// `arities` holds `p` elements, `codes` holds `n * p`; `out` is writable.
enum IclustStatus iclust_dataset_from_categorical(size_t n,
                                                  size_t p,
                                                  const size_t *arities,
                                                  const uint32_t *codes,
                                                  struct IclustDataset **out);

// Count `n × p` table, row-major.
//
// # Safety
// `counts` holds `n * p` elements; `out` is writable.
enum IclustStatus iclust_dataset_from_counts(size_t n,
                                             size_t p,
                                             const uint64_t *counts,
                                             struct IclustDataset **out);

// Number of objects in the dataset, or 0 for a null handle.
//
// # Safety
// `dataset` is null or a live handle.
size_t iclust_dataset_n(const struct IclustDataset *dataset);

// # Safety
// `dataset` is null or a handle not yet freed.
void iclust_dataset_free(struct IclustDataset *dataset);

// Fits the dataset. `options` null means defaults; `overrides` is null or
// a list of `key=value` prior settings separated by `;`.
//
// # Safety
// Pointers are null or valid as described; `out` is writable.
enum IclustStatus iclust_fit(const struct IclustDataset *dataset,
                             const struct IclustFitOptions *options,
                             const char *overrides,
                             struct IclustFit **out);

// Parses a fit previously serialized with [`iclust_fit_to_json`].
//
// # Safety
// `json` is nul-terminated; `out` is writable.
enum IclustStatus iclust_fit_from_json(const char *json, struct IclustFit **out);

// # Safety
// `fit` is null or a handle not yet freed.
void iclust_fit_free(struct IclustFit *fit);

// Number of objects, or 0 for a null handle.
//
// # Safety
// `fit` is null or a live handle.
size_t iclust_fit_n(const struct IclustFit *fit);

// Number of clusters, or 0 for a null handle.
//
// # Safety
// `fit` is null or a live handle.
size_t iclust_fit_k(const struct IclustFit *fit);

// Observational, partition and total ICL. Any output may be null.
//
// # Safety
// `fit` is a live handle; outputs are null or writable.
enum IclustStatus iclust_fit_icl(const struct IclustFit *fit,
                                 double *obs,
                                 double *partition,
                                 double *total);

// Copies the MAP labels into `labels`. On entry `*len` is the buffer
// capacity; on return it is the number of objects.
//
// # Safety
// `fit` is a live handle; `labels` holds `*len` writable elements.
enum IclustStatus iclust_fit_labels(const struct IclustFit *fit, size_t *labels, size_t *len);

// Labels of the `k`-cluster level of the merge path, `1 <= k <= K`.
// Buffer convention as in [`iclust_fit_labels`].
//
// # Safety
// `fit` is a live handle; `labels` holds `*len` writable elements.
enum IclustStatus iclust_fit_cut(const struct IclustFit *fit,
                                 size_t k,
                                 size_t *labels,
                                 size_t *len);

// Full fit as a JSON document; release with [`iclust_string_free`].
//
// # Safety
// `fit` is a live handle; `out` is writable.
enum IclustStatus iclust_fit_to_json(const struct IclustFit *fit, char **out);

// Point estimates as JSON; `view` is null, or names one view of a
// combined model. Release with [`iclust_string_free`].
//
// # Safety
// `fit` is a live handle; `view` is null or nul-terminated; `out` is writable.
enum IclustStatus iclust_fit_coef(const struct IclustFit *fit, const char *view, char **out);

// Dendrogram of the merge path in Newick form; release with
// [`iclust_string_free`].
//
// # Safety
// `fit` is a live handle; `out` is writable.
enum IclustStatus iclust_fit_newick(const struct IclustFit *fit, char **out);

// Releases a string returned by this library.
//
// # Safety
// `s` is null or was returned by this library and not yet freed.
void iclust_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ICLUST_H */
