#ifndef EPISEL_H
#define EPISEL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define EPISEL_OK 0

// Internal failure, I/O or a numerical breakdown.
#define EPISEL_ERR_INTERNAL 1

// Invalid instance, argument or precondition.
#define EPISEL_ERR_INVALID 2

// An oracle refused a search space above its guard.
#define EPISEL_ERR_GUARD 3

#define EPISEL_ERR_NULL 4

// The output buffer is shorter than required.
#define EPISEL_ERR_BUFFER 5

// The rank condition cannot be met.
#define EPISEL_ERR_INFEASIBLE 6

#define EPISEL_ERR_PANIC 7

// Information atoms and costs of a random-measurement instance on a fixed grid.
typedef struct EpiselDesign EpiselDesign;

// Random-measurement instance.
typedef struct EpiselPemsInstance EpiselPemsInstance;

// Exact-measurement instance.
typedef struct EpiselPimsInstance EpiselPimsInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The pointer
// stays valid until the next failing call on the same thread.
const char *episel_last_error(void);

// Parses a random-measurement instance file (1-based JSON).
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
int32_t episel_pems_instance_from_json(const char *json, struct EpiselPemsInstance **out);

// Generates a template instance (`"paper_small"` or `"paper_large"`).
//
// # Safety
// `template_name` must be a NUL-terminated string and `out` a valid pointer.
int32_t episel_generate_instance(uint64_t seed,
                                 const char *template_name,
                                 struct EpiselPemsInstance **out);

// # Safety
// `inst` must come from this library or be NULL.
void episel_pems_instance_free(struct EpiselPemsInstance *inst);

// Budget stored in the instance file.
//
// # Safety
// Pointers must be valid.
int32_t episel_pems_instance_budget(const struct EpiselPemsInstance *inst, double *out);

// Builds the information atoms on a `grid_points × grid_points` grid.
//
// # Safety
// Pointers must be valid.
int32_t episel_design_prepare(const struct EpiselPemsInstance *inst,
                              uintptr_t grid_points,
                              struct EpiselDesign **out);

// # Safety
// `design` must come from this library or be NULL.
void episel_design_free(struct EpiselDesign *design);

// Number of measurement groups, which is the length of every counts vector.
//
// # Safety
// Pointers must be valid.
int32_t episel_design_len(const struct EpiselDesign *design, uintptr_t *out);

// Objective value `f_P` of a counts vector.
//
// # Safety
// `counts` must point to `len` readable values.
int32_t episel_design_value(const struct EpiselDesign *design,
                            char objective,
                            const uint32_t *counts,
                            uintptr_t len,
                            double *out);

// Greedy selection within `budget`; writes its value and counts.
//
// # Safety
// `counts_out` must have room for `counts_len` values.
int32_t episel_greedy(const struct EpiselDesign *design,
                      char objective,
                      double budget,
                      double *value_out,
                      uint32_t *counts_out,
                      uintptr_t counts_len);

// Exhaustive optimum within `budget`; `EPISEL_ERR_GUARD` on large lattices.
//
// # Safety
// `counts_out` must have room for `counts_len` values.
int32_t episel_brute_force(const struct EpiselDesign *design,
                           char objective,
                           double budget,
                           double *value_out,
                           uint32_t *counts_out,
                           uintptr_t counts_len);

// Worst-case greedy guarantee `fraction · f(OPT) − slack`.
//
// # Safety
// Out-pointers must be valid.
int32_t episel_guarantee(char objective,
                         double gamma1,
                         double gamma2,
                         double budget,
                         double c_min,
                         double c_max,
                         double eps,
                         double *fraction_out,
                         double *slack_out);

// Simulates a network file and writes `x` and `r` row-major as
// `(horizon + 1) × n` arrays.
//
// # Safety
// `x_out` and `r_out` must each have room for `len` values.
int32_t episel_simulate(const char *network_json,
                        double beta,
                        double delta,
                        uintptr_t horizon,
                        double *x_out,
                        double *r_out,
                        uintptr_t len);

// Parses a network file and a cost file for the exact-measurement problem.
//
// # Safety
// Strings must be NUL-terminated and `out` valid.
int32_t episel_pims_instance_from_json(const char *network_json,
                                       const char *costs_json,
                                       struct EpiselPimsInstance **out);

// # Safety
// `inst` must come from this library or be NULL.
void episel_pims_instance_free(struct EpiselPimsInstance *inst);

// Runs the pairwise exact-selection algorithm. `selected_out` receives a
// newly allocated `;`-separated list of 1-based ids such as `x_1[2];r_1[2]`,
// released with [`episel_string_free`]. `bound_out` receives the approximation
// ratio bound, or NaN when it is undefined.
//
// # Safety
// Out-pointers must be valid.
int32_t episel_pims_solve(const struct EpiselPimsInstance *inst,
                          double *cost_out,
                          double *bound_out,
                          char **selected_out);

// # Safety
// `s` must come from this library or be NULL.
void episel_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EPISEL_H */
