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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "datagen.hpp"
#include "eval.hpp"
#include "train.hpp"

namespace pvdfl {

struct DatasetConfig {
  int buildings = 5;
  int years = 3;
  std::uint64_t seed = 7;
  int load_noise_level = 2;
  NoiseSpec dni_noise = NoiseSpec::dni_default();
  NoiseSpec load_noise = NoiseSpec::load_default();
  TariffConfig tariff;
  std::int64_t start_hour = kDefaultStartHour;

  void validate() const;  // ConfigInvalid
};

/// Buildings plus the shared weather and tariff series and one load
/// forecast per building. Noise-spec seeds inside `config` are ignored;
/// every stream derives from config.seed.
struct Dataset {
  DatasetConfig config;
  std::vector<Building> buildings;
  HourlySeries dni;
  HourlySeries dni_forecast;
  HourlySeries price_import;
  HourlySeries price_export;
  std::vector<HourlySeries> load_forecast;

  std::size_t index_of(const std::string& id) const;  // PreconditionViolated
};

Dataset generate_dataset(const DatasetConfig& config);

/// Layout: dataset.json, series.csv (hour,dni_wm2,dni_forecast_wm2,
/// price_import_eur_kwh,price_export_eur_kwh), buildings/<id>.csv,
/// load_forecasts/<id>.csv (hour,load_forecast_kwh).
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
/// Missing load_forecasts/ files are regenerated from the noise settings.
Dataset load_dataset(const std::filesystem::path& dir);

/// Load forecast of building i at sweep level 0..6, same noise stream for
/// every level.
HourlySeries load_forecast_at_level(const Dataset& dataset, std::size_t building, int level);

struct ExperimentConfig {
  LstmHyper hyper;
  int max_epochs = 300;
  int patience = 20;
  double quad_reg_eps = 1e-3;
  double holdout_frac = 0.0;
  double train_frac = 0.6;
  std::uint64_t seed = 7;
  int jobs = 1;     // buildings in parallel
  int workers = 1;  // regret evaluations in parallel within a batch

  /// "full": 3x200 LSTM, lr 1e-4. "bench": 2x64 LSTM, lr 1e-3.
  static ExperimentConfig profile(const std::string& name);  // ConfigInvalid
  void validate() const;
  TrainConfig train_config(Regime regime, std::size_t building, int level) const;
};

struct BuildingData {
  std::string id;
  std::size_t index = 0;
  int level = 0;
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Samples of one building split chronologically, perfect costs cached.
/// `level` picks the load-forecast noise level (default: the dataset's).
BuildingData prepare_building(const Dataset& dataset, std::size_t index, const ExperimentConfig& config,
                              std::optional<int> level = std::nullopt);

/// Trains one regime. DFL_WS needs `init` (an MSE checkpoint); MSE and DFL
/// start from a seeded fresh model with normalization fitted on the train
/// split.
TrainResult train_regime(const BuildingData& data, Regime regime, const ExperimentConfig& config,
                         const ForecastModel* init = nullptr);

std::vector<Day> naive_forecasts(const std::vector<Sample>& samples);

struct BuildingFailure {
  std::string building;
  std::string message;
};

struct ExperimentResult {
  EvalReport report;
  std::vector<BuildingFailure> failures;
};

/// Trains LSTM, DFL and DFL-WS for every building, evaluates them with the
/// Naive baseline and returns the finalized report. Timing rows are filled;
/// sweep rows are not. A failing building is reported, not fatal.
ExperimentResult run_experiment(const Dataset& dataset, const ExperimentConfig& config);

/// Runs `body(i)` for i in [0, n) on up to `jobs` threads; exceptions are
/// rethrown after all threads finish (first index wins).
void for_each_index(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

TimingRow timing_row(const std::string& building, Regime regime, const TrainHistory& history);

}  // namespace pvdfl
