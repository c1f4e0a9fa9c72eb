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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "metrics.hpp"
#include "train.hpp"

namespace pvdfl {

inline constexpr const char* kNoOpt = "No-opt";
inline constexpr const char* kNaive = "Naive";
inline constexpr const char* kLstm = "LSTM";
inline constexpr const char* kDfl = "DFL";
inline constexpr const char* kDflWs = "DFL-WS";
inline constexpr const char* kPerfect = "Perfect";

/// Row order of the results table.
const std::vector<std::string>& report_models();
/// Table name of the model produced by a training regime.
std::string model_name(Regime regime);

struct ModelEval {
  std::optional<double> s_rmse;  // absent for No-opt
  double real_cost = 0.0;
  double relative_cost = 0.0;
  double mean_regret = 0.0;
  std::vector<double> daily_costs;
  std::vector<double> daily_regrets;  // daily cost minus the Perfect row's
  std::vector<Day> forecasts;         // empty for No-opt
  std::vector<Day> p_ch, p_dis;
};

struct BuildingEval {
  std::string id;
  std::vector<std::int64_t> dates;
  std::vector<Day> pv_actual;
  std::map<std::string, ModelEval> models;
  long infeasible_events = 0;
  double perfect_cost = 0.0;
  double noopt_cost = 0.0;
};

struct PooledRow {
  std::string model;
  std::optional<double> s_rmse;
  double real_cost = 0.0;
  double relative_cost = 0.0;
  double mean_regret = 0.0;
  int buildings = 0;
};

struct SweepRow {
  int level = 0;
  std::string model;
  std::optional<double> s_rmse;
  double scaled_cost = 0.0;  // Perfect = 1
  int buildings = 0;
};

struct TimingRow {
  std::string building;
  std::string regime;
  int best_epoch = 0;
  int epochs_run = 0;
  double seconds_to_best = 0.0;
  double seconds_total = 0.0;
  long skipped_singular = 0;
};

struct EvalReport {
  std::map<std::string, BuildingEval> per_building;
  std::vector<PooledRow> pooled;
  std::vector<DmResult> dm_cost;
  std::vector<DmResult> dm_error;
  std::vector<SweepRow> sweep;
  std::vector<TimingRow> timing;
  long infeasible_events = 0;
};

/// Pure-LP schedules on each model's PV forecast and the load forecast,
/// replayed on actual PV and load. Perfect and No-opt rows are added here.
/// A replay that leaves the relaxed SoC window counts as an infeasible
/// event and is charged the no-battery cost of that day.
BuildingEval evaluate_building(const std::string& id, const std::vector<Sample>& test,
                               const std::map<std::string, std::vector<Day>>& forecasts);

/// Pooled rows (building means) and, with two or more buildings, cost and
/// error DM tests for every pair of forecasting models.
void finalize_report(EvalReport& report);

/// Sweep rows of one noise level from the building evaluations at that
/// level: mean S-RMSE and mean over buildings of cost / Perfect cost.
std::vector<SweepRow> sweep_rows(int level, const std::map<std::string, BuildingEval>& per_building);

enum class Season { Winter, Summer, Transition };
const char* to_string(Season season) noexcept;
/// Nov-Feb winter, May-Aug summer, otherwise transition.
Season season_of_day(std::int64_t day_index);

/// Linear-interpolation percentile of an unsorted sample, q in [0, 100].
double percentile(std::vector<double> values, double q);

/// Writes results_table.csv, results_per_building.csv, daily_costs.csv,
/// dm_cost.csv, dm_error.csv, forecast_profiles.csv, battery_profiles.csv,
/// sweep.csv and timing.csv. Throws IoError, PreconditionViolated on an
/// empty report.
void emit_report(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace pvdfl
