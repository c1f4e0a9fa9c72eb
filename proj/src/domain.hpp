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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace pvdfl {

inline constexpr int kHoursPerDay = 24;

enum class Unit { kWh, EurPerKWh, WPerM2, Dimensionless };

const char* to_string(Unit unit) noexcept;

/// Hourly series anchored at an integer UTC hour index. Energy series (kWh)
/// must be finite; construction through make() enforces the invariants.
struct HourlySeries {
  std::int64_t start_hour = 0;
  std::vector<double> values;
  Unit unit = Unit::Dimensionless;

  static HourlySeries make(std::int64_t start_hour, std::vector<double> values, Unit unit,
                           bool whole_days = false, bool non_negative = false);

  std::size_t size() const noexcept { return values.size(); }
  std::size_t days() const noexcept { return values.size() / kHoursPerDay; }
  std::span<const double> day(std::size_t d) const;
  std::int64_t end_hour() const noexcept { return start_hour + static_cast<std::int64_t>(values.size()); }
};

struct BatterySpec {
  double capacity_kwh = 1.0;
  double c_rate_divisor = 2.7;
  double soc_min_frac = 0.2;
  double soc_max_frac = 0.8;
  double soc_init_frac = 0.5;

  double max_power() const noexcept { return capacity_kwh / c_rate_divisor; }
  double soc_init_kwh() const noexcept { return soc_init_frac * capacity_kwh; }

  // Throws InvalidBattery.
  void validate() const;

  bool operator==(const BatterySpec&) const = default;
};

/// One scheduling horizon (24 hours in production; the 4-hour analog used by
/// the oracle tests shares the layout).
struct DayInstance {
  std::vector<double> pv;
  std::vector<double> load;
  std::vector<double> price_import;
  std::vector<double> price_export;
  BatterySpec battery;

  std::size_t horizon() const noexcept { return pv.size(); }
};

DayInstance validate_day_instance(DayInstance instance, std::size_t hours = kHoursPerDay);

struct Schedule {
  std::vector<double> p_ch, p_dis, p_im, p_ex, mode;
  std::vector<double> soc;  // horizon + 1 entries, soc[0] is the initial state
  double cost = 0.0;

  std::size_t horizon() const noexcept { return p_ch.size(); }
};

/// Energy balance, power limits and SoC bookkeeping of a schedule against its
/// instance. Returns an empty string when all invariants hold within tol,
/// otherwise a description of the first violation.
std::string check_schedule(const Schedule& schedule, const DayInstance& instance, double tol = 1e-6,
                           double soc_min_frac = -1.0, double soc_max_frac = -1.0);

/// Grid cost of hourly import/export under the given prices.
double grid_cost(std::span<const double> p_im, std::span<const double> p_ex, std::span<const double> price_import,
                 std::span<const double> price_export);

struct Building {
  std::string id;
  double yearly_load_mwh = 0.0;
  HourlySeries load_series;
  HourlySeries pv_series;
  BatterySpec battery;

  void validate() const;
};

// --- serialization --------------------------------------------------------

std::string battery_to_json(const BatterySpec& battery);
BatterySpec battery_from_json(const std::string& text);

/// Writes `hour,load_kwh,pv_kwh` rows with round-trip precision.
void write_building_csv(std::ostream& out, const Building& building);
void write_building_csv(const std::filesystem::path& path, const Building& building);

struct LoadPvColumns {
  HourlySeries load;
  HourlySeries pv;
};

/// Parses the building CSV schema. ParseError/SchemaError messages carry
/// `source:line`.
LoadPvColumns read_building_csv(std::istream& in, const std::string& source);
LoadPvColumns read_building_csv(const std::filesystem::path& path);

}  // namespace pvdfl
