#ifndef DECONFLICT_H
#define DECONFLICT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DcStatus {
  DC_STATUS_OK = 0,
  DC_STATUS_NULL_POINTER = 1,
  DC_STATUS_INVALID_UTF8 = 2,
  DC_STATUS_PARSE_ERROR = 3,
  DC_STATUS_INVALID_ARGUMENT = 4,
  DC_STATUS_ILLEGAL_ACTION = 5,
  DC_STATUS_FINISHED = 6,
  DC_STATUS_REPLAY_INVALID = 7,
  DC_STATUS_INTERNAL = 8,
  DC_STATUS_PANIC = 9,
} DcStatus;

typedef enum DcLevel {
  DC_LEVEL_EASY = 0,
  DC_LEVEL_MEDIUM = 1,
  DC_LEVEL_HARD = 2,
} DcLevel;

typedef enum DcPlayer {
  DC_PLAYER_PROPONENT = 0,
  DC_PLAYER_OPPONENT = 1,
} DcPlayer;

typedef enum DcMode {
  DC_MODE_N = 0,
  DC_MODE_X = 1,
} DcMode;

typedef enum DcAction {
  DC_ACTION_NORTH = 0,
  DC_ACTION_SOUTH = 1,
  DC_ACTION_WEST = 2,
  DC_ACTION_EAST = 3,
  DC_ACTION_WAIT = 4,
} DcAction;

/**
 * A parsed, validated culture.
 */
typedef struct DcCulture DcCulture;

/**
 * A running game session.
 */
typedef struct DcSession DcSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message for the last failed call on this thread; empty after a
 * successful call. Valid until the next library call on the same thread.
 */
const char *dc_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library, freed once.
 */
void dc_string_free(char *s);

/**
 * Loads a built-in culture.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DcStatus dc_culture_builtin(enum DcLevel level, struct DcCulture **out);

/**
 * Parses a culture from its text form.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum DcStatus dc_culture_parse(const char *source, struct DcCulture **out);

/**
 * # Safety
 * `culture` must be NULL or a live handle from this library.
 */
void dc_culture_free(struct DcCulture *culture);

/**
 * The culture as a JSON document.
 *
 * # Safety
 * `culture` must be a live handle; `out` must be valid for writes.
 */
enum DcStatus dc_culture_json(const struct DcCulture *culture, char **out);

/**
 * Decides who wins the culture's default motion when `proponent` proposes
 * it against `opponent`. Contexts are written `name=value,...`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum DcStatus dc_culture_decide(const struct DcCulture *culture,
                                const char *proponent,
                                const char *opponent,
                                enum DcPlayer *winner);

/**
 * Plays the dispute optimally and renders an explanation of the outcome
 * for the party `perspective`. `reasons` >= 2 asks for a contrastive
 * explanation; 1 asks for a plain one.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum DcStatus dc_culture_explain(const struct DcCulture *culture,
                                 const char *proponent,
                                 const char *opponent,
                                 size_t reasons,
                                 enum DcPlayer perspective,
                                 uint64_t seed,
                                 char **out);

/**
 * Starts a session on the default map.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum DcStatus dc_session_new(enum DcLevel level,
                             enum DcMode mode,
                             uint64_t seed,
                             struct DcSession **out);

/**
 * # Safety
 * `session` must be NULL or a live handle from this library.
 */
void dc_session_free(struct DcSession *session);

/**
 * Advances the session by one step at `now_ms` on the caller's clock.
 * If `events_json` is not NULL it receives the step's events as JSON.
 *
 * # Safety
 * `session` must be a live handle; `events_json` NULL or valid for writes.
 */
enum DcStatus dc_session_step(struct DcSession *session,
                              enum DcAction action,
                              uint64_t now_ms,
                              char **events_json);

/**
 * # Safety
 * `session` must be a live handle; `fuel` valid for writes.
 */
enum DcStatus dc_session_fuel(const struct DcSession *session, int64_t *fuel);

/**
 * # Safety
 * `session` must be a live handle; `finished` valid for writes.
 */
enum DcStatus dc_session_is_finished(const struct DcSession *session, bool *finished);

/**
 * The client-visible state as JSON.
 *
 * # Safety
 * `session` must be a live handle; `out` valid for writes.
 */
enum DcStatus dc_session_snapshot_json(const struct DcSession *session, char **out);

/**
 * The hash-chained replay log, one JSON record per line.
 *
 * # Safety
 * `session` must be a live handle; `out` valid for writes.
 */
enum DcStatus dc_session_replay_log(const struct DcSession *session, char **out);

/**
 * Re-simulates a replay log. Returns [`DcStatus::ReplayInvalid`] if any
 * record was altered. If `summary_json` is not NULL it receives a summary
 * of a valid log.
 *
 * # Safety
 * `log` must be NUL-terminated; `summary_json` NULL or valid for writes.
 */
enum DcStatus dc_replay_verify(const char *log, char **summary_json);

/**
 * Library version, static storage.
 */
const char *dc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DECONFLICT_H */
