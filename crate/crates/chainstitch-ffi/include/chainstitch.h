#ifndef CHAINSTITCH_H
#define CHAINSTITCH_H

/* Generated by cbindgen from chainstitch-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum CsxStatus {
  // The call succeeded and any out-pointer now holds a result.
  CSX_OK = 0,
  // A required pointer argument was null.
  CSX_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  CSX_INVALID_UTF8 = 2,
  // The instance JSON was malformed or structurally invalid.
  CSX_INVALID_INSTANCE = 3,
  // An argument value was out of range or unknown.
  CSX_INVALID_ARGUMENT = 4,
  // The exact-search budget refused an instance of this size.
  CSX_BUDGET_EXCEEDED = 5,
  // An internal invariant failed; the result is unusable.
  CSX_INTERNAL = 6,
} CsxStatus;

// Opaque handle to a parsed instance.
typedef struct CsxInstance CsxInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parse an instance from a JSON document.
//
// On `CsxOk`, `*out` owns a new handle that must be released with
// `csx_instance_free`. Certificates embedded in the document are validated
// syntactically and then ignored by this layer.
//
// # Safety
//
// `json` must be a valid NUL-terminated string and `out` a valid pointer.
enum CsxStatus csx_instance_parse_json(const char *json, struct CsxInstance **out);

// Release a handle returned by `csx_instance_parse_json`. Null is ignored.
//
// # Safety
//
// `instance` must be null or a handle from this library, freed once.
void csx_instance_free(struct CsxInstance *instance);

// Number of nodes in the instance; 0 when the handle is null.
//
// # Safety
//
// `instance` must be null or a live handle from this library.
uint32_t csx_instance_node_count(const struct CsxInstance *instance);

// Run a mechanism on the realization drawn by `seed` with every hospital
// reporting truthfully.
//
// `mechanism` is one of `"segment"`, `"average"`, or `"naive-opt"`; `s` is
// the target segment length; `f` is the fixed scale parameter, with 0
// meaning "derive it from the view size". On `CsxOk`, `*out_json` owns a
// NUL-terminated JSON object with fields `status`, `path`, `welfare`,
// `utilities`, and `trace_digest`; free it with `csx_string_free`.
//
// # Safety
//
// `instance` must be a live handle, `mechanism` a valid NUL-terminated
// string, and `out_json` a valid pointer.
enum CsxStatus csx_run_mechanism(const struct CsxInstance *instance,
                                 const char *mechanism,
                                 uint32_t s,
                                 uint32_t f,
                                 uint64_t seed,
                                 char **out_json);

// Compute one benchmark on the realization drawn by `seed` and write the
// resulting chain length to `*out_length`.
//
// `kind` is one of `"opt"`, `"sopt"`, `"avgopt"`, or `"pi-ir"`; `s` is the
// segment threshold and is ignored by kinds that do not use one.
//
// # Safety
//
// `instance` must be a live handle, `kind` a valid NUL-terminated string,
// and `out_length` a valid pointer.
enum CsxStatus csx_benchmark(const struct CsxInstance *instance,
                             const char *kind,
                             uint32_t s,
                             uint64_t seed,
                             uint32_t *out_length);

// Release a string returned by this library. Null is ignored.
//
// # Safety
//
// `s` must be null or a string from this library, freed once.
void csx_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CHAINSTITCH_H */
