#ifndef FRAGSIM_H
#define FRAGSIM_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FragsimStatus {
  FRAGSIM_STATUS_OK = 0,
  FRAGSIM_STATUS_NULL_POINTER = 1,
  FRAGSIM_STATUS_INVALID_UTF8 = 2,
  FRAGSIM_STATUS_PARSE_ERROR = 3,
  FRAGSIM_STATUS_INVALID_MODEL = 4,
  FRAGSIM_STATUS_SIMULATION_ERROR = 5,
  FRAGSIM_STATUS_BUFFER_TOO_SMALL = 6,
  FRAGSIM_STATUS_PANIC = 7,
} FragsimStatus;

typedef enum FragsimStopReason {
  FRAGSIM_STOP_REASON_TIME = 0,
  FRAGSIM_STOP_REASON_BUDGET = 1,
  FRAGSIM_STOP_REASON_ABSORBED = 2,
  FRAGSIM_STOP_REASON_BOUND_HIT = 3,
} FragsimStopReason;

// A parsed model configuration.
typedef struct FragsimModel FragsimModel;

// The result of one trajectory.
typedef struct FragsimReport FragsimReport;

// Scalar results of one trajectory.
typedef struct FragsimSummary {
  double final_time;
  uint64_t event_count;
  uint64_t final_compartments;
  uint64_t final_mass;
  enum FragsimStopReason stop_reason;
  bool suspected_explosion;
  bool overflowed;
} FragsimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty when none. Valid until
// the next call on this thread.
const char *fragsim_last_error(void);

// Library version as a static nul-terminated string.
const char *fragsim_version(void);

// Parses a TOML model configuration.
//
// # Safety
// `toml` must be a nul-terminated string and `out` a valid pointer.
enum FragsimStatus fragsim_model_from_toml(const char *toml, struct FragsimModel **out);

// # Safety
// `model` must come from [`fragsim_model_from_toml`] and not be freed yet;
// null is ignored.
void fragsim_model_free(struct FragsimModel *model);

// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum FragsimStatus fragsim_model_species_count(const struct FragsimModel *model, size_t *out);

// Runs one trajectory from the configured initial state. `t_max <= 0` or
// NaN and `event_budget == 0` keep the configured values.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum FragsimStatus fragsim_simulate(const struct FragsimModel *model,
                                    uint64_t seed,
                                    double t_max,
                                    uint64_t event_budget,
                                    struct FragsimReport **out);

// # Safety
// `report` must come from [`fragsim_simulate`] and not be freed yet; null
// is ignored.
void fragsim_report_free(struct FragsimReport *report);

// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum FragsimStatus fragsim_report_summary(const struct FragsimReport *report,
                                          struct FragsimSummary *out);

// Writes the final per-species totals into `buf`. `written` receives the
// number of species even when `len` is too small.
//
// # Safety
// `buf` must hold `len` values; `report` and `written` must be valid.
enum FragsimStatus fragsim_report_species_totals(const struct FragsimReport *report,
                                                 uint64_t *buf,
                                                 size_t len,
                                                 size_t *written);

// The full report as JSON.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum FragsimStatus fragsim_report_json(const struct FragsimReport *report, char **out);

// Regime classification of a one-species model as JSON.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum FragsimStatus fragsim_classify(const struct FragsimModel *model, char **out);

// # Safety
// `s` must come from this library and not be freed yet; null is ignored.
void fragsim_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRAGSIM_H */
