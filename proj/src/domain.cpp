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

#include "domain.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace pvdfl {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NegativeEnergy: return "NegativeEnergy";
    case ErrorCode::PriceInversion: return "PriceInversion";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InvalidBattery: return "InvalidBattery";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::ScheduleInfeasible: return "ScheduleInfeasible";
    case ErrorCode::SingularKkt: return "SingularKkt";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ZeroMaxPv: return "ZeroMaxPv";
    case ErrorCode::DegenerateScale: return "DegenerateScale";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
  }
  return "Unknown";
}

const char* to_string(Unit unit) noexcept {
  switch (unit) {
    case Unit::kWh: return "kWh";
    case Unit::EurPerKWh: return "EUR_per_kWh";
    case Unit::WPerM2: return "W_per_m2";
    case Unit::Dimensionless: return "dimensionless";
  }
  return "unknown";
}

HourlySeries HourlySeries::make(std::int64_t start_hour, std::vector<double> values, Unit unit, bool whole_days,
                                bool non_negative) {
  if (values.empty()) fail(ErrorCode::LengthMismatch, "series is empty");
  if (whole_days && values.size() % kHoursPerDay != 0)
    fail(ErrorCode::LengthMismatch, "series length " + std::to_string(values.size()) + " is not whole days");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) fail(ErrorCode::NonFinite, "value at offset " + std::to_string(i));
    if (non_negative && values[i] < 0.0)
      fail(ErrorCode::NegativeEnergy, "negative value at offset " + std::to_string(i));
  }
  return HourlySeries{start_hour, std::move(values), unit};
}

std::span<const double> HourlySeries::day(std::size_t d) const {
  if ((d + 1) * kHoursPerDay > values.size()) fail(ErrorCode::LengthMismatch, "day index out of range");
  return std::span<const double>(values).subspan(d * kHoursPerDay, kHoursPerDay);
}

void BatterySpec::validate() const {
  const auto bad = [](const std::string& what) { fail(ErrorCode::InvalidBattery, what); };
  if (!(capacity_kwh > 0.0) || !std::isfinite(capacity_kwh)) bad("capacity_kwh must be > 0");
  if (!(c_rate_divisor > 0.0) || !std::isfinite(c_rate_divisor)) bad("c_rate_divisor must be > 0");
  if (!(soc_min_frac >= 0.0 && soc_min_frac < 1.0)) bad("soc_min_frac must lie in [0,1)");
  if (!(soc_max_frac > soc_min_frac && soc_max_frac <= 1.0)) bad("soc_max_frac must lie in (soc_min_frac,1]");
  if (!(soc_init_frac > soc_min_frac && soc_init_frac < soc_max_frac))
    bad("soc_init_frac must lie strictly between the SoC bounds");
}

DayInstance validate_day_instance(DayInstance instance, std::size_t hours) {
  const auto check_len = [&](const std::vector<double>& v, const char* name) {
    if (v.size() != hours)
      fail(ErrorCode::LengthMismatch,
           std::string(name) + " has " + std::to_string(v.size()) + " entries, expected " + std::to_string(hours));
  };
  check_len(instance.pv, "pv");
  check_len(instance.load, "load");
  check_len(instance.price_import, "price_import");
  check_len(instance.price_export, "price_export");
  for (std::size_t t = 0; t < hours; ++t) {
    for (double v : {instance.pv[t], instance.load[t], instance.price_import[t], instance.price_export[t]})
      if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "non-finite input at hour " + std::to_string(t));
    if (instance.pv[t] < 0.0) fail(ErrorCode::NegativeEnergy, "pv < 0 at hour " + std::to_string(t));
    if (instance.load[t] < 0.0) fail(ErrorCode::NegativeEnergy, "load < 0 at hour " + std::to_string(t));
    if (instance.price_export[t] > instance.price_import[t])
      fail(ErrorCode::PriceInversion, "price_export > price_import at hour " + std::to_string(t));
  }
  instance.battery.validate();
  return instance;
}

std::string check_schedule(const Schedule& s, const DayInstance& inst, double tol, double soc_min_frac,
                           double soc_max_frac) {
  const std::size_t T = inst.horizon();
  std::ostringstream msg;
  if (s.p_ch.size() != T || s.p_dis.size() != T || s.p_im.size() != T || s.p_ex.size() != T || s.mode.size() != T ||
      s.soc.size() != T + 1)
    return "schedule dimensions do not match the instance horizon";
  const BatterySpec& b = inst.battery;
  const double pmax = b.max_power();
  const double lo = (soc_min_frac >= 0.0 ? soc_min_frac : b.soc_min_frac) * b.capacity_kwh;
  const double hi = (soc_max_frac >= 0.0 ? soc_max_frac : b.soc_max_frac) * b.capacity_kwh;
  for (std::size_t t = 0; t < T; ++t) {
    const double balance = inst.pv[t] + s.p_im[t] + s.p_dis[t] - s.p_ex[t] - inst.load[t] - s.p_ch[t];
    if (std::abs(balance) > tol) {
      msg << "energy balance off by " << balance << " at hour " << t;
      return msg.str();
    }
    if (s.p_ch[t] < -tol || s.p_dis[t] < -tol || s.p_im[t] < -tol || s.p_ex[t] < -tol) {
      msg << "negative flow at hour " << t;
      return msg.str();
    }
    if (s.mode[t] < -tol || s.mode[t] > 1.0 + tol) {
      msg << "mode outside [0,1] at hour " << t;
      return msg.str();
    }
    if (s.p_ch[t] > pmax * s.mode[t] + tol || s.p_dis[t] > pmax * (1.0 - s.mode[t]) + tol) {
      msg << "power limit violated at hour " << t;
      return msg.str();
    }
    if (std::abs(s.soc[t + 1] - (s.soc[t] + s.p_ch[t] - s.p_dis[t])) > tol) {
      msg << "SoC dynamics violated at hour " << t;
      return msg.str();
    }
  }
  for (std::size_t t = 0; t <= T; ++t)
    if (s.soc[t] < lo - tol || s.soc[t] > hi + tol) {
      msg << "SoC " << s.soc[t] << " outside [" << lo << ", " << hi << "] at step " << t;
      return msg.str();
    }
  if (std::abs(s.soc[0] - b.soc_init_kwh()) > tol || std::abs(s.soc[T] - b.soc_init_kwh()) > tol)
    return "initial or terminal SoC differs from soc_init";
  return {};
}

double grid_cost(std::span<const double> p_im, std::span<const double> p_ex, std::span<const double> price_import,
                 std::span<const double> price_export) {
  double cost = 0.0;
  for (std::size_t t = 0; t < p_im.size(); ++t) cost += p_im[t] * price_import[t] - p_ex[t] * price_export[t];
  return cost;
}

void Building::validate() const {
  if (id.empty()) fail(ErrorCode::SchemaError, "building id is empty");
  if (!(yearly_load_mwh > 0.0)) fail(ErrorCode::SchemaError, "yearly_load_mwh must be > 0 for " + id);
  if (load_series.start_hour != pv_series.start_hour || load_series.size() != pv_series.size())
    fail(ErrorCode::LengthMismatch, "load and pv cover different hour ranges for " + id);
  battery.validate();
}

// --- serialization --------------------------------------------------------

std::string battery_to_json(const BatterySpec& b) {
  nlohmann::json j{{"capacity_kwh", b.capacity_kwh},   {"c_rate_divisor", b.c_rate_divisor},
                   {"soc_min_frac", b.soc_min_frac},   {"soc_max_frac", b.soc_max_frac},
                   {"soc_init_frac", b.soc_init_frac}};
  return j.dump(2);
}

BatterySpec battery_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, e.what());
  }
  BatterySpec b;
  try {
    b.capacity_kwh = j.at("capacity_kwh").get<double>();
    b.c_rate_divisor = j.at("c_rate_divisor").get<double>();
    b.soc_min_frac = j.at("soc_min_frac").get<double>();
    b.soc_max_frac = j.at("soc_max_frac").get<double>();
    b.soc_init_frac = j.at("soc_init_frac").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SchemaError, e.what());
  }
  b.validate();
  return b;
}

void write_building_csv(std::ostream& out, const Building& building) {
  out << "hour,load_kwh,pv_kwh\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < building.load_series.size(); ++i)
    out << building.load_series.start_hour + static_cast<std::int64_t>(i) << ',' << building.load_series.values[i]
        << ',' << building.pv_series.values[i] << '\n';
}

void write_building_csv(const std::filesystem::path& path, const Building& building) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  write_building_csv(out, building);
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& cell, const std::string& where) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\r')) ++end;
  if (end == begin || (end && *end != '\0')) fail(ErrorCode::ParseError, where + ": cannot parse '" + cell + "'");
  return v;
}

}  // namespace

LoadPvColumns read_building_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::ParseError, source + ":1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "hour,load_kwh,pv_kwh") fail(ErrorCode::SchemaError, source + ":1: unexpected header '" + line + "'");

  std::int64_t first_hour = 0;
  std::vector<double> load, pv;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) fail(ErrorCode::ParseError, where + ": expected 3 columns");
    const double hour_value = parse_double(cells[0], where);
    const auto hour = static_cast<std::int64_t>(hour_value);
    if (static_cast<double>(hour) != hour_value) fail(ErrorCode::ParseError, where + ": hour is not an integer");
    const double l = parse_double(cells[1], where);
    const double p = parse_double(cells[2], where);
    if (!std::isfinite(l) || !std::isfinite(p)) fail(ErrorCode::SchemaError, where + ": non-finite value");
    if (l < 0.0) fail(ErrorCode::SchemaError, where + ": negative load_kwh");
    if (p < 0.0) fail(ErrorCode::SchemaError, where + ": negative pv_kwh");
    if (load.empty()) {
      first_hour = hour;
    } else if (hour != first_hour + static_cast<std::int64_t>(load.size())) {
      fail(ErrorCode::SchemaError, where + ": hours are not consecutive");
    }
    load.push_back(l);
    pv.push_back(p);
  }
  if (load.empty()) fail(ErrorCode::SchemaError, source + ": no data rows");
  return {HourlySeries::make(first_hour, std::move(load), Unit::kWh, false, true),
          HourlySeries::make(first_hour, std::move(pv), Unit::kWh, false, true)};
}

LoadPvColumns read_building_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return read_building_csv(in, path.filename().string());
}

}  // namespace pvdfl
