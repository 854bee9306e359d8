/* C interface to the isolated-word recognition front end. */

#ifndef PARLING_H
#define PARLING_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum ParlingStatus {
  PARLING_STATUS_OK = 0,
  // A required pointer argument was null.
  PARLING_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  PARLING_STATUS_INVALID_UTF8 = 2,
  // File system failure (path in the error message).
  PARLING_STATUS_IO = 3,
  // Unreadable or unsupported audio.
  PARLING_STATUS_BAD_AUDIO = 4,
  // An enrollment clip did not endpoint to exactly one word.
  PARLING_STATUS_NOT_ISOLATED = 5,
  // The store holds no templates.
  PARLING_STATUS_NO_TEMPLATES = 6,
  // The store file is malformed or from another schema version.
  PARLING_STATUS_BAD_STORE = 7,
  // Invalid configuration or spec value.
  PARLING_STATUS_BAD_CONFIG = 8,
  // A panic or unclassified failure inside the library.
  PARLING_STATUS_INTERNAL = 9,
} ParlingStatus;

// Opaque recognizer state: enrolled templates plus the pipeline
// configuration they were normalized under.
typedef struct ParlingStore ParlingStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the calling thread's most recent failure; empty if none.
// The pointer stays valid until this thread's next failing call.
const char *parling_last_error(void);

// Release a string returned by this library. Null is a no-op.
//
// # Safety
// `s` must be null or an unreleased string obtained from this library.
void parling_string_free(char *s);

// Create an empty store with the default pipeline configuration.
//
// # Safety
// `out` must be a valid pointer.
enum ParlingStatus parling_store_new(struct ParlingStore **out);

// Open a store file written by `parling_store_save` (or the CLI).
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum ParlingStatus parling_store_open(const char *path, struct ParlingStore **out);

// Write the store to `path` as versioned JSON.
//
// # Safety
// `store` must be a live handle and `path` a valid NUL-terminated string.
enum ParlingStatus parling_store_save(const struct ParlingStore *store, const char *path);

// Release a store handle. Null is a no-op.
//
// # Safety
// `store` must be null or an unreleased handle from this library.
void parling_store_free(struct ParlingStore *store);

// Word and template counts of a store.
//
// # Safety
// `store` must be a live handle; count pointers may be null to skip.
enum ParlingStatus parling_store_stats(const struct ParlingStore *store,
                                       size_t *words,
                                       size_t *templates);

// Enroll one isolated-word WAV clip under `word`. The clip must endpoint
// to exactly one segment; on failure the store is unchanged.
//
// # Safety
// `store` must be a live handle; `word` and `wav_path` valid
// NUL-terminated strings.
enum ParlingStatus parling_enroll_wav(struct ParlingStore *store,
                                      const char *word,
                                      const char *wav_path);

// Recognize every isolated word in a WAV clip. On Ok, `json_out` holds a
// JSON array of tagged result records (free with `parling_string_free`).
//
// # Safety
// `store` must be a live handle, `wav_path` a valid NUL-terminated
// string, and `json_out` a valid pointer.
enum ParlingStatus parling_recognize_wav(const struct ParlingStore *store,
                                         const char *wav_path,
                                         char **json_out);

// Profile every segment of a WAV clip: crisp accent/speed/emphasis,
// membership degrees, and correction weights, as a JSON array of tagged
// profile records. A null `store` measures the clip against itself; a
// non-empty store supplies the speed and level references.
//
// # Safety
// `store` must be null or a live handle, `wav_path` a valid
// NUL-terminated string, and `json_out` a valid pointer.
enum ParlingStatus parling_analyze_wav(const struct ParlingStore *store,
                                       const char *wav_path,
                                       char **json_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARLING_H */
