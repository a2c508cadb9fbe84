#ifndef ELICIT_H
#define ELICIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define ELICIT_FAMILY_NORMAL 0

#define ELICIT_FAMILY_STUDENT_T 1

#define ELICIT_FAMILY_CAUCHY 2

typedef enum ElicitStatus {
  ELICIT_STATUS_OK = 0,
  ELICIT_STATUS_NULL_POINTER = 1,
  ELICIT_STATUS_INVALID_ARGUMENT = 2,
  ELICIT_STATUS_INVALID_JUDGEMENTS = 3,
  ELICIT_STATUS_FIT_FAILED = 4,
  ELICIT_STATUS_INVALID_TRANSITION = 5,
  ELICIT_STATUS_PARSE_ERROR = 6,
  ELICIT_STATUS_UNSUPPORTED_VERSION = 7,
  ELICIT_STATUS_PANIC = 8,
} ElicitStatus;

typedef enum ElicitSessionState {
  ELICIT_SESSION_STATE_COLLECTING = 0,
  ELICIT_SESSION_STATE_FITTED = 1,
  ELICIT_SESSION_STATE_FEEDBACK_GIVEN = 2,
  ELICIT_SESSION_STATE_FINALIZED = 3,
} ElicitSessionState;

/**
 * Opaque judgement set.
 */
typedef struct ElicitJudgementSet ElicitJudgementSet;

/**
 * Opaque elicitation session.
 */
typedef struct ElicitSession ElicitSession;

typedef struct ElicitFit {
  double location;
  double scale;
  double max_abs_residual;
  double sse;
} ElicitFit;

typedef struct ElicitFeasibility {
  bool feasible;
  double min_max_violation;
  /**
   * The widest-margin member when feasible, the least-violating one otherwise.
   */
  double location;
  double scale;
} ElicitFeasibility;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call into the library.
 */
const char *elicit_last_error(void);

/**
 * Releases a string returned by the library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void elicit_string_free(char *s);

/**
 * `P(X <= x)`. `dof` is read only for Student-t.
 *
 * # Safety
 * `result` must be valid for writes.
 */
enum ElicitStatus elicit_cdf(int family,
                             uint32_t dof,
                             double location,
                             double scale,
                             double x,
                             double *result);

/**
 * Inverse of [`elicit_cdf`] for `p` in (0, 1).
 *
 * # Safety
 * `result` must be valid for writes.
 */
enum ElicitStatus elicit_quantile(int family,
                                  uint32_t dof,
                                  double location,
                                  double scale,
                                  double p,
                                  double *result);

/**
 * Creates an empty judgement set.
 *
 * # Safety
 * `set` must be valid for writes.
 */
enum ElicitStatus elicit_judgements_new(struct ElicitJudgementSet **set);

/**
 * The worked-example judgements: `points` is 3 or 5.
 *
 * # Safety
 * `set` must be valid for writes.
 */
enum ElicitStatus elicit_judgements_canonical(uint32_t points,
                                              bool with_boxes,
                                              struct ElicitJudgementSet **set);

/**
 * Parses `{"judgements": [{"p": .., "x": .., "dp": .., "dx": ..}]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `set` must be valid for writes.
 */
enum ElicitStatus elicit_judgements_from_json(const char *json, struct ElicitJudgementSet **set);

/**
 * Appends `P(X < x) = p` with a box of half-widths `dp`, `dx`.
 *
 * # Safety
 * `set` must be a live handle.
 */
enum ElicitStatus elicit_judgements_push(struct ElicitJudgementSet *set,
                                         double p,
                                         double x,
                                         double dp,
                                         double dx);

/**
 * # Safety
 * `set` must be a live handle; `len` must be valid for writes.
 */
enum ElicitStatus elicit_judgements_len(const struct ElicitJudgementSet *set, size_t *len);

/**
 * # Safety
 * `set` must come from this library and not have been freed. NULL is ignored.
 */
void elicit_judgements_free(struct ElicitJudgementSet *set);

/**
 * Interpolates the median and the complementary pair nearest the quartiles.
 *
 * # Safety
 * `set` must be a live handle; `result` must be valid for writes.
 */
enum ElicitStatus elicit_fit_exact(const struct ElicitJudgementSet *set,
                                   int family,
                                   uint32_t dof,
                                   struct ElicitFit *result);

/**
 * Minimizes the squared probability residuals.
 *
 * # Safety
 * `set` must be a live handle; `result` must be valid for writes.
 */
enum ElicitStatus elicit_fit_least_squares(const struct ElicitJudgementSet *set,
                                           int family,
                                           uint32_t dof,
                                           struct ElicitFit *result);

/**
 * Whether some member of the family passes through every box. An
 * infeasible family is a successful call with `feasible == false`.
 *
 * # Safety
 * `set` must be a live handle; `result` must be valid for writes.
 */
enum ElicitStatus elicit_check_feasibility(const struct ElicitJudgementSet *set,
                                           int family,
                                           uint32_t dof,
                                           struct ElicitFeasibility *result);

/**
 * Starts an empty session.
 *
 * # Safety
 * `id` and `label` must be NUL-terminated strings; `session` must be valid
 * for writes.
 */
enum ElicitStatus elicit_session_new(const char *id,
                                     const char *label,
                                     struct ElicitSession **session);

/**
 * Applies one event, e.g. `{"type": "fit", "families": ["normal"]}`. On
 * failure the session is unchanged.
 *
 * # Safety
 * `session` must be a live handle; `event_json` a NUL-terminated string.
 */
enum ElicitStatus elicit_session_apply_json(struct ElicitSession *session, const char *event_json);

/**
 * # Safety
 * `session` must be a live handle; `state` must be valid for writes.
 */
enum ElicitStatus elicit_session_state(const struct ElicitSession *session,
                                       enum ElicitSessionState *state);

/**
 * Serializes the session document; free the result with
 * [`elicit_string_free`].
 *
 * # Safety
 * `session` must be a live handle; `json` must be valid for writes.
 */
enum ElicitStatus elicit_session_to_json(const struct ElicitSession *session, char **json);

/**
 * Reads a session document written by [`elicit_session_to_json`].
 *
 * # Safety
 * `json` must be a NUL-terminated string; `session` must be valid for writes.
 */
enum ElicitStatus elicit_session_load(const char *json, struct ElicitSession **session);

/**
 * # Safety
 * `session` must come from this library and not have been freed. NULL is
 * ignored.
 */
void elicit_session_free(struct ElicitSession *session);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ELICIT_H */
