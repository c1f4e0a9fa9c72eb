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
#include <optional>
#include <string>
#include <vector>

#include "diffopt.hpp"
#include "domain.hpp"
#include "forecast.hpp"

namespace pvdfl {

using Day = std::array<double, kSeqLen>;

enum class Regime { MSE, DFL, DFL_WS };

const char* to_string(Regime regime) noexcept;
Regime regime_from_string(const std::string& text);  // ConfigInvalid

struct TrainConfig {
  Regime regime = Regime::MSE;
  int max_epochs = 300;
  int patience = 20;
  std::uint64_t seed = 0;
  double quad_reg_eps = 1e-3;
  LstmHyper hyper;
  /// Fraction of the training split held out for epoch selection. 0 selects
  /// on the test split.
  double holdout_frac = 0.0;
  double grad_clip = 1.0;
  int workers = 1;  // parallel regret evaluations within a batch

  void validate() const;  // ConfigInvalid
};

/// One forecast day. `window` feeds the model; the rest feeds the scheduler.
struct Sample {
  FeatureWindow window;
  Day pv_actual{};
  Day load_forecast{};
  Day load_actual{};
  Day price_import{};
  Day price_export{};
  BatterySpec battery;
  std::int64_t date = 0;  // day index since the epoch
  std::optional<double> perfect_cost;  // cached regret baseline

  RegretInputs regret_inputs(const Day& pv_forecast) const;
};

/// Day d of the building becomes a sample with the PV of day d-1 as history.
/// All series must cover the building's hour range.
std::vector<Sample> make_samples(const Building& building, const HourlySeries& dni_forecast,
                                 const HourlySeries& load_forecast, const HourlySeries& price_import,
                                 const HourlySeries& price_export);

/// First round(train_frac * n) samples train, the rest test.
std::pair<std::vector<Sample>, std::vector<Sample>> split_chronological(std::vector<Sample> samples,
                                                                        double train_frac = 0.6);

struct EpochRecord {
  int epoch = 0;  // 0 = before any update
  double train_loss = 0.0;
  double select_metric = 0.0;
  double test_mse = 0.0;
  double test_regret = 0.0;
  double test_srmse = 0.0;
  double seconds = 0.0;  // cumulative wall clock
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double seconds_to_best = 0.0;
  double seconds_total = 0.0;
  long skipped_singular = 0;
};

struct TrainResult {
  ForecastModel model;  // parameters of the best epoch
  TrainHistory history;
};

/// Fits normalization statistics on the training samples.
void fit_normalization(ForecastModel& model, const std::vector<Sample>& train);

std::vector<Day> predict_all(const ForecastModel& model, const std::vector<Sample>& samples);

/// Fills perfect_cost on every sample that lacks it.
void cache_perfect_costs(std::vector<Sample>& samples);

double mean_regret(const std::vector<Day>& forecasts, const std::vector<Sample>& samples, double quad_reg_eps);

TrainResult train_mse(ForecastModel model, const std::vector<Sample>& train, const std::vector<Sample>& test,
                      const TrainConfig& config);

/// Regret training; DFL starts from `model` as given (fresh), DFL_WS from a
/// loaded MSE checkpoint. Samples must carry perfect_cost (see
/// cache_perfect_costs).
TrainResult train_dfl(ForecastModel model, const std::vector<Sample>& train, const std::vector<Sample>& test,
                      const TrainConfig& config);

}  // namespace pvdfl
