/* Generated by cbindgen from the typeloom-ffi crate. Do not edit. */

#ifndef TYPELOOM_H
#define TYPELOOM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of converting one file to module syntax.
 */
typedef enum TlConversion {
  TL_CONVERSION_CONVERTED = 0,
  TL_CONVERSION_ALREADY_ESM = 1,
  TL_CONVERSION_SKIPPED_DYNAMIC = 2,
  TL_CONVERSION_FAILED = 3,
} TlConversion;

/**
 * Origin of a type name passed to [`tl_normalize_type`].
 */
typedef enum TlPredictionFormat {
  TL_PREDICTION_FORMAT_TOKEN_ALIGNED = 0,
  TL_PREDICTION_FORMAT_LOCATION_KEYED = 1,
} TlPredictionFormat;

/**
 * Result code of every call.
 */
typedef enum TlStatus {
  TL_STATUS_OK = 0,
  TL_STATUS_NULL_ARGUMENT = 1,
  TL_STATUS_INVALID_UTF8 = 2,
  TL_STATUS_PARSE_ERROR = 3,
  TL_STATUS_PREDICTION_ERROR = 4,
  TL_STATUS_IO_ERROR = 5,
  TL_STATUS_COMPILER_ERROR = 6,
  TL_STATUS_INVALID_ARGUMENT = 7,
  TL_STATUS_PANIC = 8,
} TlStatus;

/**
 * A table of type predictions for one file.
 */
typedef struct TlPredictions TlPredictions;

/**
 * A parsed JavaScript or TypeScript file.
 */
typedef struct TlSource TlSource;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the library as a static string.
 */
const char *tl_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *tl_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been released before.
 */
void tl_string_free(char *s);

/**
 * Parses `text` as the file `path`; the extension selects the dialect.
 * Text that does not parse still yields a handle, with `*parses` false.
 *
 * # Safety
 * String arguments must be nul-terminated; `out` must be writable.
 */
enum TlStatus tl_source_new(const char *path,
                            const char *text,
                            struct TlSource **out,
                            bool *parses);

/**
 * # Safety
 * `source` must be null or a handle from [`tl_source_new`] not yet freed.
 */
void tl_source_free(struct TlSource *source);

/**
 * Number of annotation sites (variables, parameters, results) lacking a
 * type.
 *
 * # Safety
 * `source` must be a live handle; `count` must be writable.
 */
enum TlStatus tl_source_site_count(const struct TlSource *source, size_t *count);

/**
 * Converts one file to module syntax on its own, without rewriting the
 * specifiers of other files. `*text` receives the converted text, or null
 * when the file is left as it is.
 *
 * # Safety
 * `source` must be a live handle; out-parameters must be writable.
 */
enum TlStatus tl_convert_file(const struct TlSource *source,
                              enum TlConversion *status,
                              char **text);

/**
 * Parses a prediction table from CSV text.
 *
 * # Safety
 * `csv` must be nul-terminated; `out` must be writable.
 */
enum TlStatus tl_predictions_parse(const char *csv,
                                   enum TlPredictionFormat format,
                                   struct TlPredictions **out);

/**
 * # Safety
 * `table` must be null or a handle from [`tl_predictions_parse`] not yet
 * freed.
 */
void tl_predictions_free(struct TlPredictions *table);

/**
 * Weaves predictions into a file. `*text` receives the TypeScript text and
 * `*annotated` the number of annotations inserted; a result that would not
 * parse is reverted to the original text with zero annotations.
 *
 * # Safety
 * Handles must be live; out-parameters must be writable.
 */
enum TlStatus tl_weave(const struct TlSource *source,
                       const struct TlPredictions *table,
                       char **text,
                       size_t *annotated);

/**
 * Canonical spelling of a predicted type name.
 *
 * # Safety
 * `raw` must be nul-terminated; `out` must be writable.
 */
enum TlStatus tl_normalize_type(const char *raw, enum TlPredictionFormat format, char **out);

/**
 * The longest prefix of generated text that is a type, or null.
 *
 * # Safety
 * `generated` must be nul-terminated; `out` must be writable.
 */
enum TlStatus tl_extract_type_prefix(const char *generated, char **out);

/**
 * Type checks the TypeScript files of a package directory and returns the
 * result as JSON. A null `compiler` uses the default compiler lookup.
 *
 * # Safety
 * String arguments must be nul-terminated or (for `compiler`) null; `json`
 * must be writable.
 */
enum TlStatus tl_type_check(const char *pkg_dir, const char *compiler, char **json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TYPELOOM_H */
