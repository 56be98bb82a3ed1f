#ifndef TICKETSIM_H
#define TICKETSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum TsStatus {
  TS_STATUS_OK = 0,
  // A required pointer argument was NULL.
  TS_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  TS_STATUS_INVALID_UTF8 = 2,
  // Bad input data, configuration or arguments.
  TS_STATUS_DATA_ERROR = 3,
  TS_STATUS_NOT_FOUND = 4,
  // I/O, provider or internal failure.
  TS_STATUS_RUNTIME_ERROR = 5,
  // A Rust panic was caught at the boundary.
  TS_STATUS_PANIC = 6,
} TsStatus;

// A loaded ticket corpus.
typedef struct TsCorpus TsCorpus;

// A runnable technique with every corpus ticket indexed, oldest first.
typedef struct TsEngine TsEngine;

// A fitted model artifact.
typedef struct TsModel TsModel;

// Ranked recommendations from one query.
typedef struct TsResults TsResults;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until
// the next call into this library on the same thread.
const char *ts_last_error(void);

// Library version as a static string.
const char *ts_version(void);

// Loads a JSON-lines ticket file.
//
// # Safety
// `path` must be a nul-terminated string and `out` a valid pointer.
enum TsStatus ts_corpus_load(const char *path, struct TsCorpus **out);

// Number of tickets, or 0 for NULL.
//
// # Safety
// `corpus` must be NULL or a live corpus handle.
size_t ts_corpus_len(const struct TsCorpus *corpus);

// # Safety
// `corpus` must be NULL or a handle from [`ts_corpus_load`] not yet freed.
void ts_corpus_free(struct TsCorpus *corpus);

// Reads a model artifact written by `ticketsim fit` or [`ts_model_save`].
//
// # Safety
// `path` must be a nul-terminated string and `out` a valid pointer.
enum TsStatus ts_model_load(const char *path, struct TsModel **out);

// Fits a technique that needs only a training corpus (`tfidf`, `bm25`,
// `lda`, `random`) with default settings. `train` may be NULL for `random`.
//
// # Safety
// `technique` must be a nul-terminated string, `train` NULL or a live
// corpus handle, and `out` a valid pointer.
enum TsStatus ts_model_fit(const char *technique,
                           const struct TsCorpus *train,
                           uint64_t seed,
                           struct TsModel **out);

// # Safety
// `model` must be a live model handle and `path` a nul-terminated string.
enum TsStatus ts_model_save(const struct TsModel *model, const char *path);

// Technique name as a static string, or NULL for a NULL handle.
//
// # Safety
// `model` must be NULL or a live model handle.
const char *ts_model_technique(const struct TsModel *model);

// # Safety
// `model` must be NULL or a handle not yet freed.
void ts_model_free(struct TsModel *model);

// Instantiates `model` and indexes every ticket of `corpus`. Both handles
// may be freed afterwards.
//
// # Safety
// `model` and `corpus` must be live handles and `out` a valid pointer.
enum TsStatus ts_engine_new(const struct TsModel *model,
                            const struct TsCorpus *corpus,
                            struct TsEngine **out);

// Number of indexed tickets, or 0 for NULL.
//
// # Safety
// `engine` must be NULL or a live engine handle.
size_t ts_engine_len(const struct TsEngine *engine);

// Ranks the `window` most recent tickets (0 = all) against a new ticket
// and returns the best `k`.
//
// # Safety
// `engine` must be a live engine handle, `title` and `description`
// nul-terminated strings, and `out` a valid pointer.
enum TsStatus ts_engine_query(const struct TsEngine *engine,
                              const char *title,
                              const char *description,
                              size_t k,
                              size_t window,
                              struct TsResults **out);

// # Safety
// `engine` must be NULL or a handle not yet freed.
void ts_engine_free(struct TsEngine *engine);

// # Safety
// `results` must be NULL or a live results handle.
size_t ts_results_len(const struct TsResults *results);

// Ticket id at rank `i`, or NULL when out of range. Owned by `results`.
//
// # Safety
// `results` must be NULL or a live results handle.
const char *ts_results_id(const struct TsResults *results, size_t i);

// Score at rank `i`, or NaN when out of range.
//
// # Safety
// `results` must be NULL or a live results handle.
double ts_results_score(const struct TsResults *results, size_t i);

// # Safety
// `results` must be NULL or a handle not yet freed.
void ts_results_free(struct TsResults *results);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TICKETSIM_H */
