#ifndef TTJ_H
#define TTJ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TtjStatus {
  TTJ_STATUS_OK = 0,
  TTJ_STATUS_NULL_POINTER = 1,
  TTJ_STATUS_INVALID_UTF8 = 2,
  /*
   Malformed case JSON or inconsistent case content.
   */
  TTJ_STATUS_INVALID_CASE = 3,
  TTJ_STATUS_INVALID_ARGUMENT = 4,
  /*
   Shrinking was asked for a case that does not fail.
   */
  TTJ_STATUS_NOT_FAILING = 5,
  /*
   A Rust panic was caught at the boundary.
   */
  TTJ_STATUS_INTERNAL = 6,
} TtjStatus;

typedef enum TtjVerdict {
  TTJ_VERDICT_PASS = 0,
  TTJ_VERDICT_MISMATCH = 1,
  TTJ_VERDICT_STRUCTURED_ERROR = 2,
} TtjVerdict;

/*
 Opaque test case.
 */
typedef struct TtjCase TtjCase;

/*
 Opaque result of running a case.
 */
typedef struct TtjReport TtjReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Parses a case file document.

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum TtjStatus ttj_case_from_json(const char *json, struct TtjCase **out);

/*
 Synthesizes a case. `path` is 0 for tree-first, 1 for plan-first.

 # Safety
 `out` must be a valid pointer.
 */
enum TtjStatus ttj_case_generate(uint64_t seed,
                                 uint32_t max_size,
                                 uint32_t max_rel_size,
                                 uint32_t path,
                                 struct TtjCase **out);

/*
 Canonical case file JSON.

 # Safety
 `tc` must be a live handle and `out` a valid pointer.
 */
enum TtjStatus ttj_case_to_json(const struct TtjCase *tc, char **out);

/*
 Sets the defect flags: bit 0 = m1, bit 1 = m2, bit 2 = m3.

 # Safety
 `tc` must be a live handle.
 */
enum TtjStatus ttj_case_set_defects(struct TtjCase *tc, uint32_t bits);

/*
 Number of relations and total tuples.

 # Safety
 `tc` must be a live handle; out-pointers must be valid.
 */
enum TtjStatus ttj_case_size(const struct TtjCase *tc, uint32_t *relations, uint32_t *tuples);

/*
 DDL, inserts and the equivalent SELECT.

 # Safety
 `tc` must be a live handle and `out` a valid pointer.
 */
enum TtjStatus ttj_case_emit_sql(const struct TtjCase *tc, char **out);

/*
 Shrinks a failing case to a smaller one with the same verdict kind.

 # Safety
 `tc` must be a live handle and `out` a valid pointer.
 */
enum TtjStatus ttj_case_shrink(const struct TtjCase *tc, struct TtjCase **out);

/*
 # Safety
 `tc` must be null or a handle not yet freed.
 */
void ttj_case_free(struct TtjCase *tc);

/*
 Runs the case through all evaluators; `trace` nonzero records the
 physical event log.

 # Safety
 `tc` must be a live handle and `out` a valid pointer.
 */
enum TtjStatus ttj_run(const struct TtjCase *tc, bool trace, struct TtjReport **out);

/*
 # Safety
 `report` must be a live handle and `out` a valid pointer.
 */
enum TtjStatus ttj_report_verdict(const struct TtjReport *report, enum TtjVerdict *out);

/*
 The report as a JSON document.

 # Safety
 `report` must be a live handle and `out` a valid pointer.
 */
enum TtjStatus ttj_report_to_json(const struct TtjReport *report, char **out);

/*
 # Safety
 `report` must be null or a handle not yet freed.
 */
void ttj_report_free(struct TtjReport *report);

/*
 # Safety
 `s` must be null or a string returned by this library and not yet freed.
 */
void ttj_string_free(char *s);

/*
 Message for the last failed call on this thread; empty after a success.
 Valid until the next call into the library on the same thread.
 */
const char *ttj_last_error_message(void);

/*
 Library version, static storage.
 */
const char *ttj_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TTJ_H */
