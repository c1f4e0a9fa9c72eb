/*
 Copyright 2026 The pvdfl Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

/* PV-battery day-ahead scheduling with decision-focused PV forecasting.
 *
 * Every function returns a pvdfl_status; on failure the message is
 * available through pvdfl_last_error() on the calling thread until the next
 * call. Arrays are caller-owned. Strings returned through char** must be
 * released with pvdfl_free_string().
 */
#ifndef PVDFL_H
#define PVDFL_H

#include <stddef.h>

#if defined(PVDFL_BUILDING)
#define PVDFL_API __attribute__((visibility("default")))
#else
#define PVDFL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pvdfl_status {
  PVDFL_OK = 0,
  PVDFL_LENGTH_MISMATCH = 1,
  PVDFL_NEGATIVE_ENERGY = 2,
  PVDFL_PRICE_INVERSION = 3,
  PVDFL_NON_FINITE = 4,
  PVDFL_INVALID_BATTERY = 5,
  PVDFL_INFEASIBLE = 6,
  PVDFL_MAX_ITERATIONS = 7,
  PVDFL_SCHEDULE_INFEASIBLE = 8,
  PVDFL_SINGULAR_KKT = 9,
  PVDFL_PRECONDITION_VIOLATED = 10,
  PVDFL_NON_FINITE_LOSS = 11,
  PVDFL_CONFIG_INVALID = 12,
  PVDFL_PARSE_ERROR = 13,
  PVDFL_SCHEMA_ERROR = 14,
  PVDFL_ZERO_MAX_PV = 15,
  PVDFL_DEGENERATE_SCALE = 16,
  PVDFL_ZERO_VARIANCE = 17,
  PVDFL_IO_ERROR = 18,
  PVDFL_MISSING_CHECKPOINT = 19,
  PVDFL_NULL_ARGUMENT = 98,
  PVDFL_INTERNAL = 99
} pvdfl_status;

PVDFL_API const char* pvdfl_last_error(void);
PVDFL_API const char* pvdfl_status_name(pvdfl_status status);
PVDFL_API const char* pvdfl_version(void);
PVDFL_API void pvdfl_free_string(char* text);

/* ---- pipeline commands --------------------------------------------------
 * command: "gen", "train", "eval", "sweep" or "report"; options: a JSON
 * object (see the README). *summary_json receives the JSON summary, also on
 * per-building failures, which are counted in *failed_buildings. */
PVDFL_API pvdfl_status pvdfl_run_command(const char* command, const char* options_json, char** summary_json,
                                         int* failed_buildings);

/* ---- scheduling -------------------------------------------------------- */

typedef struct pvdfl_battery {
  double capacity_kwh;
  double c_rate_divisor;
  double soc_min_frac;
  double soc_max_frac;
  double soc_init_frac;
} pvdfl_battery;

/* 1.1 kWh per MWh of yearly load, C-rate divisor 2.7, SoC 20..80%, start 50%. */
PVDFL_API pvdfl_status pvdfl_battery_for_load(double yearly_load_mwh, pvdfl_battery* out);

/* Optimal schedule for `hours` hours. soc has hours + 1 entries; any output
 * pointer may be NULL. cost is the grid cost without the quadratic term. */
PVDFL_API pvdfl_status pvdfl_solve_day(size_t hours, const double* pv, const double* load,
                                       const double* price_import, const double* price_export,
                                       const pvdfl_battery* battery, double quad_reg_eps, double* p_ch,
                                       double* p_dis, double* soc, double* cost);

/* Cost of a frozen charge/discharge plan on realized PV and load, SoC window
 * relaxed to 10..90%. */
PVDFL_API pvdfl_status pvdfl_evaluate_fixed(size_t hours, const double* pv, const double* load,
                                            const double* price_import, const double* price_export,
                                            const pvdfl_battery* battery, const double* p_ch, const double* p_dis,
                                            double* cost);

PVDFL_API pvdfl_status pvdfl_no_opt_cost(size_t hours, const double* pv, const double* load,
                                         const double* price_import, const double* price_export, double* cost);

/* Regret of a 24-hour PV forecast and, when grad is not NULL, its gradient
 * with respect to the forecast (24 entries). */
PVDFL_API pvdfl_status pvdfl_regret(const double* pv_forecast, const double* pv_actual, const double* load_forecast,
                                    const double* price_import, const double* price_export,
                                    const pvdfl_battery* battery, double quad_reg_eps, double* regret, double* grad);

/* ---- forecasting ------------------------------------------------------- */

typedef struct pvdfl_model pvdfl_model;

PVDFL_API pvdfl_status pvdfl_model_load(const char* path, pvdfl_model** out);
/* 24 hours of yesterday's PV and today's DNI forecast in, 24 kWh out. */
PVDFL_API pvdfl_status pvdfl_model_predict(const pvdfl_model* model, const double* pv_hist, const double* dni_forecast,
                                           double* out);
PVDFL_API void pvdfl_model_free(pvdfl_model* model);

/* ---- datasets ---------------------------------------------------------- */

typedef struct pvdfl_dataset pvdfl_dataset;

PVDFL_API pvdfl_status pvdfl_dataset_load(const char* dir, pvdfl_dataset** out);
PVDFL_API size_t pvdfl_dataset_building_count(const pvdfl_dataset* dataset);
/* NULL when index is out of range. Owned by the dataset. */
PVDFL_API const char* pvdfl_dataset_building_id(const pvdfl_dataset* dataset, size_t index);
PVDFL_API pvdfl_status pvdfl_dataset_battery(const pvdfl_dataset* dataset, size_t index, pvdfl_battery* out);
PVDFL_API void pvdfl_dataset_free(pvdfl_dataset* dataset);

/* ---- metrics ----------------------------------------------------------- */

PVDFL_API pvdfl_status pvdfl_s_rmse(size_t n, const double* preds, const double* actuals, double* out);
PVDFL_API pvdfl_status pvdfl_relative_cost(double cost, double perfect_cost, double noopt_cost, double* out);
/* Loss differential a - b, h - 1 autocovariance lags. */
PVDFL_API pvdfl_status pvdfl_dm_test(size_t n, const double* losses_a, const double* losses_b, int h, double* dm_stat,
                                     double* p_value);

#ifdef __cplusplus
}
#endif

#endif
