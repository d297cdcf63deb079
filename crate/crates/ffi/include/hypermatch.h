/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef HYPERMATCH_H
#define HYPERMATCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HmStatus {
  HM_STATUS_OK = 0,
  HM_STATUS_NULL_POINTER = 1,
  HM_STATUS_INVALID_ARGUMENT = 2,
  // The batch failed validation; nothing was applied.
  HM_STATUS_BATCH_REJECTED = 3,
  // The batch was applied but a settle round broke the sample inequality.
  HM_STATUS_ROUND_INEQUALITY = 4,
  HM_STATUS_INVARIANT_VIOLATION = 5,
  HM_STATUS_BUFFER_TOO_SMALL = 6,
  HM_STATUS_POISONED = 7,
  HM_STATUS_PANIC = 8,
} HmStatus;

// Opaque engine handle.
typedef struct HmEngine HmEngine;

typedef struct HmStats {
  // Distinct vertices seen.
  uint64_t n;
  // Live edges.
  uint64_t m;
  uint64_t m_max;
  // Sum of edge sizes over live edges.
  uint64_t m_prime;
  uint64_t rank;
  uint64_t matched;
  uint64_t batches;
  uint64_t round_violations;
  // Structure operations performed so far.
  uint64_t work;
} HmStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates an engine with rank bound `rank` and random seed `seed`.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum HmStatus hm_engine_new(size_t rank, uint64_t seed, struct HmEngine **out);

// Releases an engine. Null is ignored.
//
// # Safety
// `engine` must be null or a handle from `hm_engine_new` not yet freed.
void hm_engine_free(struct HmEngine *engine);

// Inserts `count` edges in one batch. Edge `i` has id `ids[i]` and vertices
// `vertices[offsets[i] .. offsets[i + 1]]`; `offsets` holds `count + 1`
// non-decreasing entries starting at 0.
//
// # Safety
// Pointers must be valid for the lengths described above.
enum HmStatus hm_insert(struct HmEngine *engine,
                        const uint64_t *ids,
                        size_t count,
                        const size_t *offsets,
                        const uint64_t *vertices);

// Deletes `count` edges in one batch.
//
// # Safety
// `ids` must be valid for `count` reads.
enum HmStatus hm_delete(struct HmEngine *engine, const uint64_t *ids, size_t count);

// Writes the matched edge covering `vertex` to `edge` and sets `matched`;
// `edge` is left untouched when the vertex is free.
//
// # Safety
// `edge` and `matched` must be valid for one write each.
enum HmStatus hm_matched_at(struct HmEngine *engine,
                            uint64_t vertex,
                            uint64_t *edge,
                            bool *matched);

// Number of matched edges, or 0 for a null or poisoned handle.
//
// # Safety
// `engine` must be null or a live handle.
size_t hm_matched_count(struct HmEngine *engine);

// Copies the matched edge ids, ascending, into `buf`. `written` receives
// the number of ids; if `cap` is too small it receives the required size
// and nothing is copied.
//
// # Safety
// `buf` must be valid for `cap` writes; `written` for one write.
enum HmStatus hm_matched_edges(struct HmEngine *engine, uint64_t *buf, size_t cap, size_t *written);

// Verifies every structure invariant.
//
// # Safety
// `engine` must be null or a live handle.
enum HmStatus hm_check(struct HmEngine *engine);

// # Safety
// `out` must be valid for one write.
enum HmStatus hm_stats(struct HmEngine *engine, struct HmStats *out);

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *hm_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPERMATCH_H */
