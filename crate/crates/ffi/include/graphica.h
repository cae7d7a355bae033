#ifndef GRAPHICA_H
#define GRAPHICA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Result codes. Zero is success.
 */
typedef enum GraphicaStatus {
  GRAPHICA_STATUS_OK = 0,
  GRAPHICA_STATUS_NULL_POINTER = 1,
  GRAPHICA_STATUS_INVALID_STRING = 2,
  GRAPHICA_STATUS_SIZE = 3,
  GRAPHICA_STATUS_GENERATION = 4,
  GRAPHICA_STATUS_SHAPE = 5,
  GRAPHICA_STATUS_SYNTHESIS = 6,
  GRAPHICA_STATUS_EMPTY_INPUT = 7,
  GRAPHICA_STATUS_DOMAIN = 8,
  GRAPHICA_STATUS_NUMERIC = 9,
  GRAPHICA_STATUS_STRATIFICATION = 10,
  GRAPHICA_STATUS_TRAINING = 11,
  GRAPHICA_STATUS_IO = 12,
  GRAPHICA_STATUS_PARSE = 13,
  GRAPHICA_STATUS_COMPATIBILITY = 14,
  GRAPHICA_STATUS_USAGE = 15,
  GRAPHICA_STATUS_PANIC = 16,
} GraphicaStatus;

/**
 * Opaque labeled dataset.
 */
typedef struct GraphicaDataset GraphicaDataset;

/**
 * Opaque trained model.
 */
typedef struct GraphicaModel GraphicaModel;

/**
 * Opaque dependency topology.
 */
typedef struct GraphicaTopology GraphicaTopology;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The caller owns
 * the returned string.
 */
char *graphica_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void graphica_string_free(char *s);

/**
 * Library version as a static nul-terminated string.
 */
const char *graphica_version(void);

/**
 * Generates a random topology.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GraphicaStatus graphica_topology_new(uintptr_t n_apps,
                                          uintptr_t n_params,
                                          uintptr_t n_kpis,
                                          uint64_t seed,
                                          struct GraphicaTopology **out);

/**
 * Parses a topology from its JSON form.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum GraphicaStatus graphica_topology_from_json(const char *json, struct GraphicaTopology **out);

/**
 * Serializes a topology to JSON. The caller owns `*out`.
 *
 * # Safety
 * `topology` must be a live handle and `out` a valid pointer.
 */
enum GraphicaStatus graphica_topology_to_json(const struct GraphicaTopology *topology, char **out);

/**
 * Number of state bits in a row (xApps + parameters + KPIs); 0 for null.
 *
 * # Safety
 * `topology` must be a live handle or null.
 */
uintptr_t graphica_topology_width(const struct GraphicaTopology *topology);

/**
 * # Safety
 * `topology` must be a live handle or null; it is invalid afterwards.
 */
void graphica_topology_free(struct GraphicaTopology *topology);

/**
 * Oracle label (0 normal, 1 direct, 2 implicit, 3 indirect) of a row of
 * `len` 0/1 bytes ordered xApps, parameters, KPIs.
 *
 * # Safety
 * `bits` must point to `len` readable bytes; `topology` must be live.
 */
enum GraphicaStatus graphica_label_row(const struct GraphicaTopology *topology,
                                       const uint8_t *bits,
                                       uintptr_t len,
                                       uint8_t *out_label);

/**
 * Synthesizes a labeled dataset over a copy of `topology`.
 *
 * # Safety
 * `topology` must be live and `out` a valid pointer.
 */
enum GraphicaStatus graphica_dataset_synth(const struct GraphicaTopology *topology,
                                           uintptr_t n_rows,
                                           double conflict_fraction,
                                           uint64_t seed,
                                           struct GraphicaDataset **out);

/**
 * Row count; 0 for null.
 *
 * # Safety
 * `dataset` must be a live handle or null.
 */
uintptr_t graphica_dataset_len(const struct GraphicaDataset *dataset);

/**
 * Copies row `index` into `bits` (`len` must equal the topology width) and
 * its label into `out_label`.
 *
 * # Safety
 * `bits` must point to `len` writable bytes; `dataset` must be live.
 */
enum GraphicaStatus graphica_dataset_row(const struct GraphicaDataset *dataset,
                                         uintptr_t index,
                                         uint8_t *bits,
                                         uintptr_t len,
                                         uint8_t *out_label);

/**
 * Dataset as CSV text. The caller owns `*out`.
 *
 * # Safety
 * `dataset` must be live and `out` a valid pointer.
 */
enum GraphicaStatus graphica_dataset_to_csv(const struct GraphicaDataset *dataset, char **out);

/**
 * # Safety
 * `dataset` must be a live handle or null; it is invalid afterwards.
 */
void graphica_dataset_free(struct GraphicaDataset *dataset);

/**
 * Loads a model checkpoint written by `graphica train`.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum GraphicaStatus graphica_model_load(const char *path, struct GraphicaModel **out);

/**
 * # Safety
 * `model` must be a live handle or null; it is invalid afterwards.
 */
void graphica_model_free(struct GraphicaModel *model);

/**
 * Predicts the conflict class of one row. `out_probs`, when not null,
 * receives the four class probabilities.
 *
 * # Safety
 * `bits` must point to `len` readable bytes, `out_probs` to 4 writable
 * doubles or be null; handles must be live.
 */
enum GraphicaStatus graphica_predict(const struct GraphicaModel *model,
                                     const struct GraphicaTopology *topology,
                                     const uint8_t *bits,
                                     uintptr_t len,
                                     uint8_t *out_label,
                                     double *out_probs);

/**
 * Root cause record for a row with the given non-normal label, formatted as
 * `label,type,affected,"roots","xapps"`. The caller owns `*out`.
 *
 * # Safety
 * `bits` must point to `len` readable bytes; `topology` must be live.
 */
enum GraphicaStatus graphica_rca(const struct GraphicaTopology *topology,
                                 const uint8_t *bits,
                                 uintptr_t len,
                                 uint8_t label,
                                 char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHICA_H */
