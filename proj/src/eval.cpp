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

#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

#include "datagen.hpp"
#include "error.hpp"
#include "sched.hpp"

namespace pvdfl {

const std::vector<std::string>& report_models() {
  static const std::vector<std::string> models{kNoOpt, kNaive, kLstm, kDfl, kDflWs, kPerfect};
  return models;
}

std::string model_name(Regime regime) {
  switch (regime) {
    case Regime::MSE: return kLstm;
    case Regime::DFL: return kDfl;
    case Regime::DFL_WS: return kDflWs;
  }
  return "?";
}

namespace {

std::vector<double> to_vec(const Day& d) { return {d.begin(), d.end()}; }

DayInstance plan_instance(const Sample& s, const Day& pv) {
  return DayInstance{to_vec(pv), to_vec(s.load_forecast), to_vec(s.price_import), to_vec(s.price_export), s.battery};
}

DayInstance actual_instance(const Sample& s) {
  return DayInstance{to_vec(s.pv_actual), to_vec(s.load_actual), to_vec(s.price_import), to_vec(s.price_export),
                     s.battery};
}

void fill_schedule(const Sample& s, const Day& pv, ModelEval& m, double noopt_day, long& infeasible) {
  const Schedule plan = solve_day(plan_instance(s, pv));
  Day ch{}, dis{};
  std::copy(plan.p_ch.begin(), plan.p_ch.end(), ch.begin());
  std::copy(plan.p_dis.begin(), plan.p_dis.end(), dis.begin());
  double cost = noopt_day;
  try {
    cost = evaluate_fixed_schedule(actual_instance(s), plan.p_ch, plan.p_dis).cost;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ScheduleInfeasible) throw;
    ++infeasible;
    ch.fill(0.0);
    dis.fill(0.0);
  }
  m.daily_costs.push_back(cost);
  m.forecasts.push_back(pv);
  m.p_ch.push_back(ch);
  m.p_dis.push_back(dis);
}

double sum(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

std::vector<double> flatten(const std::vector<Day>& days) {
  std::vector<double> out;
  out.reserve(days.size() * kSeqLen);
  for (const auto& d : days) out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::vector<std::string> forecast_models_in(const EvalReport& report) {
  std::vector<std::string> out;
  for (const char* m : {kNaive, kLstm, kDfl, kDflWs}) {
    bool everywhere = !report.per_building.empty();
    for (const auto& [id, b] : report.per_building) everywhere = everywhere && b.models.count(m);
    if (everywhere) out.emplace_back(m);
  }
  return out;
}

DmResult guarded_dm(const std::map<std::string, std::map<std::string, std::vector<double>>>& losses,
                    const std::string& a, const std::string& b) {
  try {
    return pooled_dm(losses, a, b);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroVariance) throw;
    DmResult r;
    r.model_a = a;
    r.model_b = b;
    r.dm_stat = std::numeric_limits<double>::quiet_NaN();
    r.p_value = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
}

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::string& header) : path_(path), out_(path) {
    if (!out_) fail(ErrorCode::IoError, "cannot write " + path.string());
    out_ << std::setprecision(std::numeric_limits<double>::max_digits10);
    out_ << header << '\n';
  }
  ~CsvFile() noexcept(false) {
    out_.flush();
    if (!out_ && std::uncaught_exceptions() == 0) fail(ErrorCode::IoError, "write failed for " + path_.string());
  }
  template <class T>
  CsvFile& operator<<(const T& v) {
    out_ << v;
    return *this;
  }
  CsvFile& operator<<(const std::optional<double>& v) {
    if (v) out_ << *v;
    return *this;
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void write_dm(const std::filesystem::path& path, const std::vector<DmResult>& rows) {
  CsvFile f(path, "model_a,model_b,dm_stat,p_value,per_building_significant,observations");
  for (const auto& r : rows)
    f << r.model_a << ',' << r.model_b << ',' << r.dm_stat << ',' << r.p_value << ',' << r.per_building_significant
      << ',' << r.observations << '\n';
}

constexpr Season kSeasons[] = {Season::Winter, Season::Summer, Season::Transition};

}  // namespace

BuildingEval evaluate_building(const std::string& id, const std::vector<Sample>& test,
                               const std::map<std::string, std::vector<Day>>& forecasts) {
  if (test.empty()) fail(ErrorCode::PreconditionViolated, "building " + id + " has no test days");
  BuildingEval b;
  b.id = id;
  ModelEval& noopt = b.models[kNoOpt];
  for (const auto& s : test) {
    b.dates.push_back(s.date);
    b.pv_actual.push_back(s.pv_actual);
    noopt.daily_costs.push_back(no_opt_cost(actual_instance(s)));
  }
  ModelEval& perfect = b.models[kPerfect];
  for (std::size_t i = 0; i < test.size(); ++i)
    fill_schedule(test[i], test[i].pv_actual, perfect, noopt.daily_costs[i], b.infeasible_events);
  for (const auto& [name, fc] : forecasts) {
    if (name == kNoOpt || name == kPerfect) fail(ErrorCode::PreconditionViolated, name + " is not a forecast model");
    if (fc.size() != test.size()) fail(ErrorCode::LengthMismatch, "forecasts for " + name + " do not match test days");
    ModelEval& m = b.models[name];
    for (std::size_t i = 0; i < test.size(); ++i)
      fill_schedule(test[i], fc[i], m, noopt.daily_costs[i], b.infeasible_events);
  }
  b.perfect_cost = sum(perfect.daily_costs);
  b.noopt_cost = sum(noopt.daily_costs);
  const std::vector<double> actual = flatten(b.pv_actual);
  for (auto& [name, m] : b.models) {
    m.real_cost = sum(m.daily_costs);
    m.relative_cost = relative_cost(m.real_cost, b.perfect_cost, b.noopt_cost);
    m.daily_regrets.resize(m.daily_costs.size());
    for (std::size_t i = 0; i < m.daily_costs.size(); ++i)
      m.daily_regrets[i] = m.daily_costs[i] - perfect.daily_costs[i];
    m.mean_regret = sum(m.daily_regrets) / static_cast<double>(m.daily_regrets.size());
    if (!m.forecasts.empty()) m.s_rmse = s_rmse(flatten(m.forecasts), actual);
  }
  return b;
}

void finalize_report(EvalReport& report) {
  report.pooled.clear();
  report.dm_cost.clear();
  report.dm_error.clear();
  report.infeasible_events = 0;
  for (const auto& [id, b] : report.per_building) report.infeasible_events += b.infeasible_events;
  for (const auto& name : report_models()) {
    PooledRow row;
    row.model = name;
    double srmse = 0.0;
    int with_srmse = 0;
    for (const auto& [id, b] : report.per_building) {
      const auto it = b.models.find(name);
      if (it == b.models.end()) continue;
      ++row.buildings;
      row.real_cost += it->second.real_cost;
      row.relative_cost += it->second.relative_cost;
      row.mean_regret += it->second.mean_regret;
      if (it->second.s_rmse) {
        srmse += *it->second.s_rmse;
        ++with_srmse;
      }
    }
    if (row.buildings == 0) continue;
    row.real_cost /= row.buildings;
    row.relative_cost /= row.buildings;
    row.mean_regret /= row.buildings;
    if (with_srmse > 0) row.s_rmse = srmse / with_srmse;
    report.pooled.push_back(row);
  }
  if (report.per_building.size() < 2) return;

  const std::vector<std::string> models = forecast_models_in(report);
  std::map<std::string, std::map<std::string, std::vector<double>>> costs, errors;
  for (const auto& [id, b] : report.per_building) {
    const std::vector<double> actual = flatten(b.pv_actual);
    for (const auto& name : models) {
      const ModelEval& m = b.models.at(name);
      costs[id][name] = m.daily_costs;
      std::vector<double> se = flatten(m.forecasts);
      for (std::size_t i = 0; i < se.size(); ++i) se[i] = (se[i] - actual[i]) * (se[i] - actual[i]);
      errors[id][name] = std::move(se);
    }
  }
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t j = i + 1; j < models.size(); ++j) {
      report.dm_cost.push_back(guarded_dm(costs, models[i], models[j]));
      report.dm_error.push_back(guarded_dm(errors, models[i], models[j]));
    }
}

std::vector<SweepRow> sweep_rows(int level, const std::map<std::string, BuildingEval>& per_building) {
  std::vector<SweepRow> rows;
  for (const auto& name : report_models()) {
    SweepRow row;
    row.level = level;
    row.model = name;
    double srmse = 0.0;
    int with_srmse = 0;
    for (const auto& [id, b] : per_building) {
      const auto it = b.models.find(name);
      if (it == b.models.end()) continue;
      if (!(b.perfect_cost > 0.0)) fail(ErrorCode::DegenerateScale, "building " + id + " has a non-positive Perfect cost");
      ++row.buildings;
      row.scaled_cost += it->second.real_cost / b.perfect_cost;
      if (it->second.s_rmse) {
        srmse += *it->second.s_rmse;
        ++with_srmse;
      }
    }
    if (row.buildings == 0) continue;
    row.scaled_cost /= row.buildings;
    if (with_srmse > 0) row.s_rmse = srmse / with_srmse;
    rows.push_back(row);
  }
  return rows;
}

const char* to_string(Season season) noexcept {
  switch (season) {
    case Season::Winter: return "winter";
    case Season::Summer: return "summer";
    case Season::Transition: return "transition";
  }
  return "?";
}

Season season_of_day(std::int64_t day_index) {
  const int month = month_of_hour(day_index * kHoursPerDay);
  if (month >= 11 || month <= 2) return Season::Winter;
  if (month >= 5 && month <= 8) return Season::Summer;
  return Season::Transition;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) fail(ErrorCode::PreconditionViolated, "percentile of an empty sample");
  if (!(q >= 0.0 && q <= 100.0)) fail(ErrorCode::PreconditionViolated, "percentile q must lie in [0,100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

void emit_report(const EvalReport& report, const std::filesystem::path& out_dir) {
  if (report.per_building.empty()) fail(ErrorCode::PreconditionViolated, "report has no buildings");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  {
    CsvFile f(out_dir / "results_table.csv",
              "model,s_rmse_pct,real_cost_eur,relative_cost_pct,mean_daily_regret_eur,buildings");
    for (const auto& r : report.pooled)
      f << r.model << ',' << r.s_rmse << ',' << r.real_cost << ',' << r.relative_cost << ',' << r.mean_regret << ','
        << r.buildings << '\n';
  }
  {
    CsvFile f(out_dir / "results_per_building.csv",
              "building,model,s_rmse_pct,real_cost_eur,relative_cost_pct,mean_daily_regret_eur,infeasible_events");
    for (const auto& [id, b] : report.per_building)
      for (const auto& name : report_models()) {
        const auto it = b.models.find(name);
        if (it == b.models.end()) continue;
        const ModelEval& m = it->second;
        f << id << ',' << name << ',' << m.s_rmse << ',' << m.real_cost << ',' << m.relative_cost << ','
          << m.mean_regret << ',' << b.infeasible_events << '\n';
      }
  }
  {
    CsvFile f(out_dir / "daily_costs.csv", "building,day,model,cost_eur,regret_eur");
    for (const auto& [id, b] : report.per_building)
      for (const auto& name : report_models()) {
        const auto it = b.models.find(name);
        if (it == b.models.end()) continue;
        for (std::size_t i = 0; i < b.dates.size(); ++i)
          f << id << ',' << b.dates[i] << ',' << name << ',' << it->second.daily_costs[i] << ','
            << it->second.daily_regrets[i] << '\n';
      }
  }
  write_dm(out_dir / "dm_cost.csv", report.dm_cost);
  write_dm(out_dir / "dm_error.csv", report.dm_error);

  // Seasonal hourly profiles pooled over buildings. "Actual" is the
  // realized PV.
  {
    CsvFile fp(out_dir / "forecast_profiles.csv", "model,season,hour,mean_kwh,p10_kwh,p25_kwh,p75_kwh,p90_kwh,days");
    CsvFile bp(out_dir / "battery_profiles.csv", "model,season,hour,mean_charge_kwh,mean_discharge_kwh,days");
    std::vector<std::string> names{"Actual"};
    for (const auto& n : report_models())
      if (n != kNoOpt) names.push_back(n);
    for (const auto& name : names)
      for (Season season : kSeasons) {
        std::array<std::vector<double>, kSeqLen> pv;
        std::array<double, kSeqLen> ch{}, dis{};
        std::size_t days = 0;
        for (const auto& [id, b] : report.per_building) {
          const ModelEval* m = nullptr;
          if (name != "Actual") {
            const auto it = b.models.find(name);
            if (it == b.models.end()) continue;
            m = &it->second;
          }
          for (std::size_t i = 0; i < b.dates.size(); ++i) {
            if (season_of_day(b.dates[i]) != season) continue;
            ++days;
            const Day& day = m ? m->forecasts[i] : b.pv_actual[i];
            for (int t = 0; t < kSeqLen; ++t) {
              pv[t].push_back(day[t]);
              if (m) {
                ch[t] += m->p_ch[i][t];
                dis[t] += m->p_dis[i][t];
              }
            }
          }
        }
        if (days == 0) continue;
        for (int t = 0; t < kSeqLen; ++t) {
          const double mean = std::accumulate(pv[t].begin(), pv[t].end(), 0.0) / static_cast<double>(days);
          fp << name << ',' << to_string(season) << ',' << t << ',' << mean << ',' << percentile(pv[t], 10) << ','
             << percentile(pv[t], 25) << ',' << percentile(pv[t], 75) << ',' << percentile(pv[t], 90) << ',' << days
             << '\n';
          if (name != "Actual")
            bp << name << ',' << to_string(season) << ',' << t << ',' << ch[t] / static_cast<double>(days) << ','
               << dis[t] / static_cast<double>(days) << ',' << days << '\n';
        }
      }
  }
  {
    CsvFile f(out_dir / "sweep.csv", "level,model,s_rmse_pct,scaled_cost,buildings");
    for (const auto& r : report.sweep)
      f << r.level << ',' << r.model << ',' << r.s_rmse << ',' << r.scaled_cost << ',' << r.buildings << '\n';
  }
  {
    CsvFile f(out_dir / "timing.csv",
              "building,regime,best_epoch,epochs_run,seconds_to_best,seconds_total,skipped_singular");
    for (const auto& r : report.timing)
      f << r.building << ',' << r.regime << ',' << r.best_epoch << ',' << r.epochs_run << ',' << r.seconds_to_best
        << ',' << r.seconds_total << ',' << r.skipped_singular << '\n';
  }
}

}  // namespace pvdfl
