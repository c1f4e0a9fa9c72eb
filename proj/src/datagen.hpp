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
#include <random>
#include <utility>
#include <vector>

#include "domain.hpp"

namespace pvdfl {

/// Hour index of 2020-01-01T00:00Z, the default start of synthetic data.
inline constexpr std::int64_t kDefaultStartHour = 438288;

/// Derives an independent stream seed from a global seed and a tag.
std::uint64_t derive_seed(std::uint64_t global, std::uint64_t tag, std::uint64_t index = 0);

/// Calendar month (1..12) and day-of-year (0-based) of an hour index.
int month_of_hour(std::int64_t hour);
int day_of_year(std::int64_t hour);
int day_of_week(std::int64_t hour);  // 0 = Monday

struct NoiseSpec {
  double alpha = 0.0;
  double beta = 0.0;
  double shift_prob = 0.0;
  int shift_max = 0;
  double smooth_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigInvalid

  /// Forecast noise for DNI and the level-2 load noise.
  static NoiseSpec dni_default();
  static NoiseSpec load_default();
};

/// Standard skew-normal variate, delta|u0| + sqrt(1 - delta^2) u1.
double skew_normal_sample(double alpha, std::mt19937_64& rng);

/// Multiplicative skew-normal noise, clipping to [0, max], random time
/// shifts, Gaussian smoothing; in that order.
HourlySeries apply_forecast_noise(const HourlySeries& actuals, const NoiseSpec& spec);

/// Load noise for sweep level 0..6: beta = 0.25 * level; level 0 also turns
/// off shifts and smoothing.
NoiseSpec noise_level_to_spec(int level, const NoiseSpec& base);

struct TariffConfig {
  double base_level = 0.10;
  double daily_amplitude = 0.035;
  double weekly_amplitude = 0.01;
  double trend_per_year = 0.04;
  double noise_std = 0.02;
  double noise_ar = 0.9;
  double offtake_tax = 0.15;
  double export_discount_frac = 0.95;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Import and export price series of `hours` hours starting at start_hour.
std::pair<HourlySeries, HourlySeries> generate_tariff(const TariffConfig& config, std::size_t hours,
                                                      std::int64_t start_hour = kDefaultStartHour);

/// 1.1 kWh of storage per MWh of yearly load; C-rate divisor 2.7.
BatterySpec size_battery(double yearly_load_mwh);

/// Shared weather of the neighbourhood.
struct Weather {
  HourlySeries dni;         // W/m2
  HourlySeries pv_per_kwp;  // kWh per kWp on a south-facing tilted panel
};

Weather synth_weather(std::uint64_t seed, int years, std::int64_t start_hour = kDefaultStartHour);

/// Synthetic household under `weather`: 6 kWp PV and a double-peak load
/// profile scaled to a yearly total in [3.5, 8] MWh.
Building synth_household(std::uint64_t profile_seed, int years, const Weather& weather);
Building synth_household(std::uint64_t profile_seed, int years);

/// Every *.csv in `directory` (sorted by name) as a Building with id = file
/// stem and battery sized from its mean yearly load.
std::vector<Building> load_buildings(const std::filesystem::path& directory);

/// Mean absolute percentage error over hours with actual > 0, in percent.
double mape(std::span<const double> forecast, std::span<const double> actual);

}  // namespace pvdfl
