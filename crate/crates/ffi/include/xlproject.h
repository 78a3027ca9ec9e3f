#ifndef XLPROJECT_H
#define XLPROJECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/*
 Result of every fallible call.
 */
typedef enum XlpStatus {
  XLP_STATUS_OK = 0,
  /*
   A null pointer, bad UTF-8, an out-of-range index or a short buffer.
   */
  XLP_STATUS_ARGUMENT = 1,
  XLP_STATUS_CONFIG = 2,
  XLP_STATUS_DATA = 3,
  XLP_STATUS_BACKEND = 4,
  /*
   A bug, including a caught panic.
   */
  XLP_STATUS_INTERNAL = 5,
} XlpStatus;

typedef enum XlpTask {
  XLP_TASK_EMOTION = 0,
  XLP_TASK_TRIGGER = 1,
} XlpTask;

/*
 A trained emotion or trigger classifier.
 */
typedef struct XlpModel XlpModel;

/*
 Outcome of projecting one sentence: either a labelled translation or a
 discard reason.
 */
typedef struct XlpProjection XlpProjection;

/*
 Ordered marker pairs used to wrap trigger spans before translation.
 */
typedef struct XlpScheme XlpScheme;

/*
 Message of the last failed call on this thread, or NULL after a
 successful one. The pointer stays valid until the next call into this
 library on the same thread.
 */
const char *xlp_last_error(void);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and must not be used afterwards.
 */
void xlp_string_free(char *s);

/*
 Static name of an emotion label index, or NULL when out of range.
 */
const char *xlp_emotion_label_name(uint32_t index);

/*
 Builds a marker scheme. A NULL `spec` selects the default pairs;
 otherwise `spec` uses the command-line syntax, for example `"[] {} <<,>>"`.

 # Safety
 `spec` must be NULL or a nul-terminated string; `out` must be writable.
 */
enum XlpStatus xlp_scheme_new(const char *spec, struct XlpScheme **out);

/*
 # Safety
 `scheme` must be NULL or a handle from [`xlp_scheme_new`] not yet freed.
 */
void xlp_scheme_free(struct XlpScheme *scheme);

/*
 Number of marker pairs, or 0 for NULL.

 # Safety
 `scheme` must be NULL or a live handle.
 */
uintptr_t xlp_scheme_len(const struct XlpScheme *scheme);

/*
 Renders `text` with every trigger run wrapped in its own marker pair.
 `mask` may be NULL for an unannotated sentence. The result is written to
 `out` and must be released with [`xlp_string_free`].

 # Safety
 Pointers must be valid for the given lengths; `out` must be writable.
 */
enum XlpStatus xlp_mark(const struct XlpScheme *scheme,
                        const char *text,
                        const uint8_t *mask,
                        uintptr_t mask_len,
                        char **out);

/*
 Projects the trigger mask of an English sentence onto `translated`, the
 backend output for its marked form. A discarded sentence is not an error:
 the handle reports the reason through [`xlp_projection_discard_reason`].

 # Safety
 Pointers must be valid for the given lengths; `out` must be writable.
 */
enum XlpStatus xlp_project(const struct XlpScheme *scheme,
                           const char *source_text,
                           const uint8_t *source_mask,
                           uintptr_t mask_len,
                           const char *translated,
                           const char *target_lang,
                           struct XlpProjection **out);

/*
 # Safety
 `projection` must be NULL or a handle from [`xlp_project`] not yet freed.
 */
void xlp_projection_free(struct XlpProjection *projection);

/*
 Static discard reason such as `"missing_marker"`, or NULL when the
 sentence was projected.

 # Safety
 `projection` must be a live handle.
 */
const char *xlp_projection_discard_reason(const struct XlpProjection *projection);

/*
 Clean translated text, tokens joined by single spaces. Empty for a
 discarded sentence. Owned by the handle.

 # Safety
 `projection` must be a live handle.
 */
const char *xlp_projection_text(const struct XlpProjection *projection);

/*
 Copies the projected mask into `out` as 0/1 bytes. `out_len` always
 receives the token count; pass a NULL buffer with capacity 0 to query it.

 # Safety
 `out` must hold `capacity` bytes; `out_len` must be writable.
 */
enum XlpStatus xlp_projection_mask(const struct XlpProjection *projection,
                                   uint8_t *out,
                                   uintptr_t capacity,
                                   uintptr_t *out_len);

/*
 Token F1 of one instance. Two empty masks score 1.

 # Safety
 `gold` and `pred` must hold `len` bytes; `out` must be writable.
 */
enum XlpStatus xlp_token_f1(const uint8_t *gold, const uint8_t *pred, uintptr_t len, double *out);

/*
 Macro F1 over label indices.

 # Safety
 `gold` and `pred` must hold `len` values; `out` must be writable.
 */
enum XlpStatus xlp_macro_f1(const uint32_t *gold, const uint32_t *pred, uintptr_t len, double *out);

/*
 Clamps negative scores to zero and rescales to unit sum, writing `len`
 values to `out`. All-zero input becomes uniform.

 # Safety
 `raw` and `out` must hold `len` values.
 */
enum XlpStatus xlp_normalize_attributions(const double *raw, uintptr_t len, double *out);

/*
 Share of the attribution mass on gold trigger words. `scores` are
 normalized first, as in [`xlp_normalize_attributions`].

 # Safety
 `gold` and `scores` must hold `len` values; `out` must be writable.
 */
enum XlpStatus xlp_accumulated_importance(const uint8_t *gold,
                                          const double *scores,
                                          uintptr_t len,
                                          double *out);

/*
 Reads the label from an LLM answer of the form `Label: <emotion>`.

 # Safety
 `text` must be nul-terminated; `out_label` must be writable.
 */
enum XlpStatus xlp_parse_llm_response(const char *text, uint32_t *out_label);

/*
 Loads a checkpoint written by `xlproject train`.

 # Safety
 `path` must be nul-terminated; `out` must be writable.
 */
enum XlpStatus xlp_model_load(const char *path, struct XlpModel **out);

/*
 # Safety
 `model` must be NULL or a handle from [`xlp_model_load`] not yet freed.
 */
void xlp_model_free(struct XlpModel *model);

/*
 # Safety
 `model` must be a live handle; `out` must be writable.
 */
enum XlpStatus xlp_model_task(const struct XlpModel *model, enum XlpTask *out);

/*
 Predicts the emotion label index of a sentence. Fails with
 `XLP_STATUS_CONFIG` on a trigger model.

 # Safety
 `model` must be a live handle; `text` nul-terminated; `out_label` writable.
 */
enum XlpStatus xlp_model_predict_emotion(const struct XlpModel *model,
                                         const char *text,
                                         uint32_t *out_label);

/*
 Predicts a 0/1 trigger mask and per-word scores summing to one.
 `out_len` receives the word count; when `capacity` is smaller nothing
 else is written and `XLP_STATUS_ARGUMENT` is returned. Fails with
 `XLP_STATUS_CONFIG` on an emotion model and `XLP_STATUS_DATA` on empty
 text.

 # Safety
 `out_mask` and `out_scores` must hold `capacity` values; `out_len` must be
 writable.
 */
enum XlpStatus xlp_model_predict_triggers(const struct XlpModel *model,
                                          const char *text,
                                          uint8_t *out_mask,
                                          double *out_scores,
                                          uintptr_t capacity,
                                          uintptr_t *out_len);

#endif  /* XLPROJECT_H */
