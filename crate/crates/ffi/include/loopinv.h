#ifndef LOOPINV_H
#define LOOPINV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LoopinvStatus {
  LOOPINV_STATUS_OK = 0,
  LOOPINV_STATUS_NULL_POINTER = 1,
  LOOPINV_STATUS_INVALID_UTF8 = 2,
  LOOPINV_STATUS_PARSE = 3,
  LOOPINV_STATUS_CONFIG = 4,
  /**
   * Inference ended without a verified invariant.
   */
  LOOPINV_STATUS_NOT_FOUND = 5,
  LOOPINV_STATUS_SOLVER = 6,
  LOOPINV_STATUS_ENCODE = 7,
  LOOPINV_STATUS_PANIC = 8,
} LoopinvStatus;

typedef enum LoopinvVerdict {
  LOOPINV_VERDICT_VALID = 0,
  LOOPINV_VERDICT_REFUTED = 1,
  LOOPINV_VERDICT_UNKNOWN = 2,
} LoopinvVerdict;

/**
 * Settings for inference and checking.
 */
typedef struct LoopinvConfig LoopinvConfig;

/**
 * A parsed program.
 */
typedef struct LoopinvProgram LoopinvProgram;

/**
 * A verified invariant with run statistics.
 */
typedef struct LoopinvResult LoopinvResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread, or NULL. The string is
 * owned by the library.
 */
const char *loopinv_last_error(void);

/**
 * Library version as a static string.
 */
const char *loopinv_version(void);

/**
 * Parses program source into `*out`.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a writable pointer.
 */
enum LoopinvStatus loopinv_program_parse(const char *source, struct LoopinvProgram **out);

/**
 * Number of program variables.
 *
 * # Safety
 * `program` must be NULL or a live handle.
 */
uintptr_t loopinv_program_num_vars(const struct LoopinvProgram *program);

/**
 * # Safety
 * `program` must be NULL or a handle from [`loopinv_program_parse`] that has
 * not been freed.
 */
void loopinv_program_free(struct LoopinvProgram *program);

/**
 * Default settings, with the solver taken from `SMT_SOLVER` when set.
 */
struct LoopinvConfig *loopinv_config_new(void);

/**
 * Sets one option using the keys of the settings file (`solver`, `tnorm`,
 * `eq`, `mode`, `seed`, `timeout`, `query_timeout`, `domain`, ...).
 *
 * # Safety
 * `config` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum LoopinvStatus loopinv_config_set(struct LoopinvConfig *config,
                                      const char *key,
                                      const char *value);

/**
 * # Safety
 * `config` must be NULL or a handle from [`loopinv_config_new`] that has not
 * been freed.
 */
void loopinv_config_free(struct LoopinvConfig *config);

/**
 * Infers a verified invariant. On success `*out` receives a result handle.
 *
 * # Safety
 * `program` and `config` must be live handles and `out` writable.
 */
enum LoopinvStatus loopinv_infer(const struct LoopinvProgram *program,
                                 const struct LoopinvConfig *config,
                                 struct LoopinvResult **out);

/**
 * Invariant in the input language; owned by the result.
 *
 * # Safety
 * `result` must be NULL or a live handle.
 */
const char *loopinv_result_invariant(const struct LoopinvResult *result);

/**
 * Invariant as an SMT-LIB term; owned by the result.
 *
 * # Safety
 * `result` must be NULL or a live handle.
 */
const char *loopinv_result_smt(const struct LoopinvResult *result);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
uint64_t loopinv_result_solver_calls(const struct LoopinvResult *result);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
uint64_t loopinv_result_templates_tried(const struct LoopinvResult *result);

/**
 * # Safety
 * `result` must be NULL or a live handle.
 */
uint64_t loopinv_result_wall_time_ms(const struct LoopinvResult *result);

/**
 * # Safety
 * `result` must be NULL or a handle from [`loopinv_infer`] that has not been
 * freed.
 */
void loopinv_result_free(struct LoopinvResult *result);

/**
 * Checks `invariant` against the program's conditions.
 *
 * # Safety
 * `program` and `config` must be live handles, `invariant` a NUL-terminated
 * string and `verdict` writable.
 */
enum LoopinvStatus loopinv_check(const struct LoopinvProgram *program,
                                 const struct LoopinvConfig *config,
                                 const char *invariant,
                                 enum LoopinvVerdict *verdict);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOOPINV_H */
