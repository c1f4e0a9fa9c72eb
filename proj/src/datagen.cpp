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

#include "datagen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "error.hpp"

namespace pvdfl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::chrono::sys_days day_of(std::int64_t hour) {
  const std::int64_t d = hour >= 0 ? hour / 24 : (hour - 23) / 24;
  return std::chrono::sys_days{std::chrono::days{d}};
}

double gauss_bump(double x, double mu, double width) { return std::exp(-0.5 * (x - mu) * (x - mu) / (width * width)); }

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kLatitude = 52.09;   // Utrecht
constexpr double kLongitude = 5.12;
constexpr double kHouseKwp = 6.0;

}  // namespace

std::uint64_t derive_seed(std::uint64_t global, std::uint64_t tag, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(global) ^ tag) ^ index);
}

int month_of_hour(std::int64_t hour) {
  return static_cast<int>(static_cast<unsigned>(std::chrono::year_month_day{day_of(hour)}.month()));
}

int day_of_year(std::int64_t hour) {
  const std::chrono::sys_days d = day_of(hour);
  const std::chrono::year_month_day ymd{d};
  return static_cast<int>((d - std::chrono::sys_days{ymd.year() / std::chrono::January / 1}).count());
}

int day_of_week(std::int64_t hour) {
  return static_cast<int>((std::chrono::weekday{day_of(hour)}.c_encoding() + 6) % 7);
}

void NoiseSpec::validate() const {
  if (!std::isfinite(alpha)) fail(ErrorCode::ConfigInvalid, "noise alpha must be finite");
  if (!(beta >= 0.0) || !std::isfinite(beta)) fail(ErrorCode::ConfigInvalid, "noise beta must be >= 0");
  if (!(shift_prob >= 0.0 && shift_prob <= 1.0)) fail(ErrorCode::ConfigInvalid, "shift_prob must lie in [0,1]");
  if (shift_max < 0) fail(ErrorCode::ConfigInvalid, "shift_max must be >= 0");
  if (!(smooth_sigma >= 0.0) || !std::isfinite(smooth_sigma))
    fail(ErrorCode::ConfigInvalid, "smooth_sigma must be >= 0");
}

NoiseSpec NoiseSpec::dni_default() { return NoiseSpec{-1.0, 0.20, 0.02, 5, 1.0, 0}; }

NoiseSpec NoiseSpec::load_default() { return NoiseSpec{-0.5, 0.50, 0.05, 5, 0.5, 0}; }

double skew_normal_sample(double alpha, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const double delta = alpha / std::sqrt(1.0 + alpha * alpha);
  const double u0 = normal(rng);
  const double u1 = normal(rng);
  return delta * std::abs(u0) + std::sqrt(1.0 - delta * delta) * u1;
}

HourlySeries apply_forecast_noise(const HourlySeries& actuals, const NoiseSpec& spec) {
  spec.validate();
  std::vector<double> y = actuals.values;
  double ymax = 0.0;
  for (double v : y) {
    if (!(v >= 0.0)) fail(ErrorCode::PreconditionViolated, "forecast noise needs non-negative actuals");
    ymax = std::max(ymax, v);
  }
  std::mt19937_64 rng(spec.seed);
  const std::size_t n = y.size();

  if (spec.beta > 0.0)
    for (double& v : y) v *= 1.0 + spec.beta * skew_normal_sample(spec.alpha, rng);
  for (double& v : y) v = std::clamp(v, 0.0, ymax);

  if (spec.shift_prob > 0.0 && spec.shift_max > 0) {
    const std::vector<double> before = y;
    std::vector<double> sum(n, 0.0);
    std::vector<int> count(n, 0);
    std::bernoulli_distribution moves(spec.shift_prob);
    std::uniform_int_distribution<int> offset(-spec.shift_max, spec.shift_max);
    for (std::size_t t = 0; t < n; ++t) {
      auto target = static_cast<std::ptrdiff_t>(t);
      if (moves(rng)) {
        const std::ptrdiff_t moved = target + offset(rng);
        if (moved >= 0 && moved < static_cast<std::ptrdiff_t>(n)) target = moved;
      }
      sum[static_cast<std::size_t>(target)] += before[t];
      ++count[static_cast<std::size_t>(target)];
    }
    // Collisions average; holes keep the pre-shift value.
    for (std::size_t t = 0; t < n; ++t) y[t] = count[t] ? sum[t] / count[t] : before[t];
  }

  if (spec.smooth_sigma > 0.0) {
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * spec.smooth_sigma));
    std::vector<double> kernel(static_cast<std::size_t>(radius) + 1);
    for (std::ptrdiff_t d = 0; d <= radius; ++d)
      kernel[static_cast<std::size_t>(d)] =
          std::exp(-0.5 * static_cast<double>(d * d) / (spec.smooth_sigma * spec.smooth_sigma));
    const std::vector<double> src = y;
    const auto len = static_cast<std::ptrdiff_t>(n);
    for (std::ptrdiff_t t = 0; t < len; ++t) {
      double acc = 0.0, wsum = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        if (t + d < 0 || t + d >= len) continue;
        const double w = kernel[static_cast<std::size_t>(std::abs(d))];
        acc += w * src[static_cast<std::size_t>(t + d)];
        wsum += w;
      }
      y[static_cast<std::size_t>(t)] = acc / wsum;
    }
  }
  HourlySeries out = actuals;
  out.values = std::move(y);
  return out;
}

NoiseSpec noise_level_to_spec(int level, const NoiseSpec& base) {
  if (level < 0 || level > 6) fail(ErrorCode::PreconditionViolated, "noise level must lie in 0..6");
  NoiseSpec s = base;
  s.beta = 0.25 * level;
  if (level == 0) {
    s.shift_prob = 0.0;
    s.smooth_sigma = 0.0;
  }
  return s;
}

void TariffConfig::validate() const {
  for (double v : {base_level, daily_amplitude, weekly_amplitude, trend_per_year, noise_std, offtake_tax})
    if (!std::isfinite(v)) fail(ErrorCode::ConfigInvalid, "tariff parameters must be finite");
  if (noise_std < 0.0 || offtake_tax < 0.0) fail(ErrorCode::ConfigInvalid, "noise_std and offtake_tax must be >= 0");
  if (!(noise_ar >= 0.0 && noise_ar < 1.0)) fail(ErrorCode::ConfigInvalid, "noise_ar must lie in [0,1)");
  if (!(export_discount_frac >= 0.0 && export_discount_frac <= 1.0))
    fail(ErrorCode::ConfigInvalid, "export_discount_frac must lie in [0,1]");
}

std::pair<HourlySeries, HourlySeries> generate_tariff(const TariffConfig& config, std::size_t hours,
                                                      std::int64_t start_hour) {
  config.validate();
  if (hours == 0 || hours % kHoursPerDay != 0) fail(ErrorCode::PreconditionViolated, "tariff hours must be whole days");
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal;
  std::vector<double> im(hours), ex(hours);
  double ar = 0.0;
  const double innovation = std::sqrt(1.0 - config.noise_ar * config.noise_ar) * config.noise_std;
  for (std::size_t i = 0; i < hours; ++i) {
    const std::int64_t h = start_hour + static_cast<std::int64_t>(i);
    const double hod = static_cast<double>(((h % 24) + 24) % 24);
    const double how = day_of_week(h) * 24.0 + hod;
    ar = config.noise_ar * ar + innovation * normal(rng);
    // Morning and evening peaks, night and midday troughs.
    const double wholesale = config.base_level + config.daily_amplitude * std::cos(4.0 * std::numbers::pi * (hod - 8.0) / 24.0) +
                             config.weekly_amplitude * std::cos(2.0 * std::numbers::pi * how / 168.0) +
                             config.trend_per_year * static_cast<double>(i) / 8760.0 + ar;
    im[i] = wholesale + config.offtake_tax;
    ex[i] = wholesale * config.export_discount_frac;
    if (im[i] < ex[i])
      fail(ErrorCode::ConfigInvalid, "tariff yields export above import at hour " + std::to_string(h));
  }
  return {HourlySeries::make(start_hour, std::move(im), Unit::EurPerKWh, true),
          HourlySeries::make(start_hour, std::move(ex), Unit::EurPerKWh, true)};
}

BatterySpec size_battery(double yearly_load_mwh) {
  if (!(yearly_load_mwh > 0.0) || !std::isfinite(yearly_load_mwh))
    fail(ErrorCode::PreconditionViolated, "yearly load must be > 0");
  BatterySpec b;
  b.capacity_kwh = 1.1 * yearly_load_mwh;
  b.c_rate_divisor = 2.7;
  b.soc_min_frac = 0.2;
  b.soc_max_frac = 0.8;
  b.soc_init_frac = 0.5;
  return b;
}

Weather synth_weather(std::uint64_t seed, int years, std::int64_t start_hour) {
  if (years < 1) fail(ErrorCode::PreconditionViolated, "years must be >= 1");
  const std::size_t hours = static_cast<std::size_t>(years) * 365 * 24;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> dni(hours), pv(hours);
  const double phi = kLatitude * kDeg;
  const double tilt = 35.0 * kDeg;
  double day_state = 0.0, hour_state = 0.0;
  for (std::size_t i = 0; i < hours; ++i) {
    const std::int64_t h = start_hour + static_cast<std::int64_t>(i);
    const int doy = day_of_year(h);
    const double hod = static_cast<double>(((h % 24) + 24) % 24);
    if (hod == 0.0 || i == 0) day_state = 0.7 * day_state + std::sqrt(1.0 - 0.49) * normal(rng);
    hour_state = 0.5 * hour_state + std::sqrt(1.0 - 0.5 * 0.5) * normal(rng);

    // Winters are cloudier.
    const double season = 0.3 + 0.6 * std::cos(2.0 * std::numbers::pi * (doy + 10) / 365.0);
    const double cloud = logistic(1.8 * day_state + season + 1.8 * hour_state);

    const double decl = 23.44 * kDeg * std::sin(2.0 * std::numbers::pi * (284.0 + doy + 1.0) / 365.0);
    const double solar_time = hod + 0.5 + kLongitude / 15.0;
    const double omega = 15.0 * kDeg * (solar_time - 12.0);
    const double sin_e = std::sin(phi) * std::sin(decl) + std::cos(phi) * std::cos(decl) * std::cos(omega);
    if (sin_e <= 0.0) continue;
    const double elev_deg = std::asin(sin_e) / kDeg;
    const double air_mass = 1.0 / (sin_e + 0.50572 * std::pow(elev_deg + 6.07995, -1.6364));
    const double dni_clear = 1361.0 * std::pow(0.7, std::pow(air_mass, 0.678));
    const double diffuse_clear = 0.12 * dni_clear;

    // Incidence on a south-facing panel.
    const double cos_e = std::sqrt(std::max(0.0, 1.0 - sin_e * sin_e));
    const double cos_az = std::clamp((sin_e * std::sin(phi) - std::sin(decl)) / (cos_e * std::cos(phi) + 1e-12), -1.0, 1.0);
    const double cos_inc = std::max(0.0, sin_e * std::cos(tilt) + cos_e * std::sin(tilt) * cos_az);

    const double beam = std::pow(1.0 - cloud, 1.5);
    const double diffuse = diffuse_clear * (1.0 + 1.5 * cloud * (1.0 - cloud));
    dni[i] = dni_clear * beam;
    const double poa = dni[i] * cos_inc + diffuse * (1.0 + std::cos(tilt)) / 2.0;
    pv[i] = 0.86 * poa / 1000.0;
  }
  return Weather{HourlySeries::make(start_hour, std::move(dni), Unit::WPerM2, true, true),
                 HourlySeries::make(start_hour, std::move(pv), Unit::kWh, true, true)};
}

Building synth_household(std::uint64_t profile_seed, int years, const Weather& weather) {
  if (years < 1) fail(ErrorCode::PreconditionViolated, "years must be >= 1");
  const std::size_t hours = static_cast<std::size_t>(years) * 365 * 24;
  if (weather.pv_per_kwp.size() < hours) fail(ErrorCode::LengthMismatch, "weather is shorter than the household");
  const std::int64_t start = weather.pv_per_kwp.start_hour;
  std::mt19937_64 rng(profile_seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;

  const double orientation = 0.92 + 0.12 * unit(rng);
  const double target_mwh = 3.5 + 4.5 * unit(rng);
  const double morning_at = 6.5 + 2.0 * unit(rng), evening_at = 17.5 + 3.0 * unit(rng);
  const double morning = 0.5 + 0.6 * unit(rng), evening = 0.9 + 0.8 * unit(rng);
  const double daytime = 0.1 + 0.3 * unit(rng);

  std::vector<double> pv(hours), load(hours);
  double level = 0.0;
  for (std::size_t i = 0; i < hours; ++i) {
    const std::int64_t h = start + static_cast<std::int64_t>(i);
    const double hod = static_cast<double>(((h % 24) + 24) % 24);
    const bool weekend = day_of_week(h) >= 5;
    if (hod == 0.0 || i == 0) level = 0.6 * level + 0.8 * 0.15 * normal(rng);

    pv[i] = weather.pv_per_kwp.values[i] > 0.0
                ? std::max(0.0, kHouseKwp * orientation * weather.pv_per_kwp.values[i] * (1.0 + 0.03 * normal(rng)))
                : 0.0;

    const double shift = weekend ? 1.5 : 0.0;
    const double seasonal = 1.0 + 0.2 * std::cos(2.0 * std::numbers::pi * (day_of_year(h) - 15) / 365.0);
    double base = 0.35 + morning * gauss_bump(hod, morning_at + shift, 1.2) + evening * gauss_bump(hod, evening_at, 2.0) +
                  (daytime + (weekend ? 0.3 : 0.0)) * gauss_bump(hod, 13.0, 3.0);
    double v = base * seasonal * std::exp(level + 0.6 * normal(rng) - 0.18);
    // Occasional appliance runs.
    if (unit(rng) < 0.06) v += 0.5 + 1.5 * unit(rng);
    load[i] = v;
  }
  double total = 0.0;
  for (double v : load) total += v;
  const double scale = target_mwh * 1000.0 * years / total;
  for (double& v : load) v *= scale;

  Building b;
  b.id = "synthetic";
  b.yearly_load_mwh = target_mwh;
  b.load_series = HourlySeries::make(start, std::move(load), Unit::kWh, true, true);
  b.pv_series = HourlySeries::make(start, std::move(pv), Unit::kWh, true, true);
  b.battery = size_battery(target_mwh);
  b.validate();
  return b;
}

Building synth_household(std::uint64_t profile_seed, int years) {
  return synth_household(profile_seed, years, synth_weather(derive_seed(profile_seed, 0x57454154), years));
}

std::vector<Building> load_buildings(const std::filesystem::path& directory) {
  std::error_code ec;
  if (!std::filesystem::is_directory(directory, ec))
    fail(ErrorCode::IoError, "not a directory: " + directory.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<Building> out;
  for (const auto& file : files) {
    LoadPvColumns cols = read_building_csv(file);
    Building b;
    b.id = file.stem().string();
    double total = 0.0;
    for (double v : cols.load.values) total += v;
    b.yearly_load_mwh = total / 1000.0 / (static_cast<double>(cols.load.size()) / 8760.0);
    b.load_series = std::move(cols.load);
    b.pv_series = std::move(cols.pv);
    b.battery = size_battery(b.yearly_load_mwh);
    b.validate();
    out.push_back(std::move(b));
  }
  return out;
}

double mape(std::span<const double> forecast, std::span<const double> actual) {
  if (forecast.size() != actual.size()) fail(ErrorCode::LengthMismatch, "MAPE series lengths differ");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < actual.size(); ++i)
    if (actual[i] > 1e-9) {
      sum += std::abs(forecast[i] - actual[i]) / actual[i];
      ++n;
    }
  if (n == 0) fail(ErrorCode::PreconditionViolated, "MAPE needs positive actuals");
  return 100.0 * sum / static_cast<double>(n);
}

}  // namespace pvdfl
