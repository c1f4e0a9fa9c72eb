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

#include <cstdlib>
#include <cstring>
#include <string>

#include "pvdfl.h"

#include "config_json.hpp"
#include "diffopt.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "sched.hpp"

struct pvdfl_model {
  pvdfl::ForecastModel model;
};

struct pvdfl_dataset {
  pvdfl::Dataset data;
};

namespace {

thread_local std::string g_last_error;

struct NullArgument {};

template <class F>
pvdfl_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return PVDFL_OK;
  } catch (NullArgument) {
    g_last_error = "required pointer argument is NULL";
    return PVDFL_NULL_ARGUMENT;
  } catch (const pvdfl::Error& e) {
    g_last_error = e.what();
    return static_cast<pvdfl_status>(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PVDFL_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return PVDFL_INTERNAL;
  }
}

template <class... P>
void require(const P*... ptrs) {
  if (((ptrs == nullptr) || ...)) throw NullArgument{};
}

pvdfl::BatterySpec to_spec(const pvdfl_battery& b) {
  pvdfl::BatterySpec s;
  s.capacity_kwh = b.capacity_kwh;
  s.c_rate_divisor = b.c_rate_divisor;
  s.soc_min_frac = b.soc_min_frac;
  s.soc_max_frac = b.soc_max_frac;
  s.soc_init_frac = b.soc_init_frac;
  return s;
}

pvdfl_battery from_spec(const pvdfl::BatterySpec& s) {
  return pvdfl_battery{s.capacity_kwh, s.c_rate_divisor, s.soc_min_frac, s.soc_max_frac, s.soc_init_frac};
}

std::vector<double> vec(const double* p, std::size_t n) { return std::vector<double>(p, p + n); }

pvdfl::DayInstance instance(std::size_t hours, const double* pv, const double* load, const double* pim,
                            const double* pex, const pvdfl::BatterySpec& battery) {
  return pvdfl::validate_day_instance(
      pvdfl::DayInstance{vec(pv, hours), vec(load, hours), vec(pim, hours), vec(pex, hours), battery}, hours);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* pvdfl_last_error(void) { return g_last_error.c_str(); }

const char* pvdfl_status_name(pvdfl_status status) {
  if (status == PVDFL_OK) return "Ok";
  if (status == PVDFL_NULL_ARGUMENT) return "NullArgument";
  if (status == PVDFL_INTERNAL) return "Internal";
  if (status >= 1 && status <= 19) return pvdfl::to_string(static_cast<pvdfl::ErrorCode>(status));
  return "Unknown";
}

const char* pvdfl_version(void) { return "1.0.0"; }

void pvdfl_free_string(char* text) { std::free(text); }

pvdfl_status pvdfl_run_command(const char* command, const char* options_json, char** summary_json,
                               int* failed_buildings) {
  return guarded([&] {
    require(command, options_json);
    const nlohmann::json opts = pvdfl::parse_json_object(options_json, "options");
    const pvdfl::CommandOutcome r = pvdfl::run_command(command, opts);
    if (failed_buildings) *failed_buildings = r.failed_buildings;
    if (summary_json) *summary_json = dup_string(r.summary.dump(2));
  });
}

pvdfl_status pvdfl_battery_for_load(double yearly_load_mwh, pvdfl_battery* out) {
  return guarded([&] {
    require(out);
    *out = from_spec(pvdfl::size_battery(yearly_load_mwh));
  });
}

pvdfl_status pvdfl_solve_day(size_t hours, const double* pv, const double* load, const double* price_import,
                             const double* price_export, const pvdfl_battery* battery, double quad_reg_eps,
                             double* p_ch, double* p_dis, double* soc, double* cost) {
  return guarded([&] {
    require(pv, load, price_import, price_export, battery);
    pvdfl::SolveOptions opts;
    opts.quad_reg_eps = quad_reg_eps;
    const pvdfl::Schedule s =
        pvdfl::solve_day(instance(hours, pv, load, price_import, price_export, to_spec(*battery)), opts);
    if (p_ch) std::copy(s.p_ch.begin(), s.p_ch.end(), p_ch);
    if (p_dis) std::copy(s.p_dis.begin(), s.p_dis.end(), p_dis);
    if (soc) std::copy(s.soc.begin(), s.soc.end(), soc);
    if (cost) *cost = s.cost;
  });
}

pvdfl_status pvdfl_evaluate_fixed(size_t hours, const double* pv, const double* load, const double* price_import,
                                  const double* price_export, const pvdfl_battery* battery, const double* p_ch,
                                  const double* p_dis, double* cost) {
  return guarded([&] {
    require(pv, load, price_import, price_export, battery, p_ch, p_dis, cost);
    *cost = pvdfl::evaluate_fixed_schedule(instance(hours, pv, load, price_import, price_export, to_spec(*battery)),
                                           std::span<const double>(p_ch, hours), std::span<const double>(p_dis, hours))
                .cost;
  });
}

pvdfl_status pvdfl_no_opt_cost(size_t hours, const double* pv, const double* load, const double* price_import,
                               const double* price_export, double* cost) {
  return guarded([&] {
    require(pv, load, price_import, price_export, cost);
    *cost = pvdfl::no_opt_cost(instance(hours, pv, load, price_import, price_export, pvdfl::BatterySpec{}));
  });
}

pvdfl_status pvdfl_regret(const double* pv_forecast, const double* pv_actual, const double* load_forecast,
                          const double* price_import, const double* price_export, const pvdfl_battery* battery,
                          double quad_reg_eps, double* regret, double* grad) {
  return guarded([&] {
    require(pv_forecast, pv_actual, load_forecast, price_import, price_export, battery, regret);
    constexpr std::size_t n = pvdfl::kHoursPerDay;
    const pvdfl::RegretInputs in{{pv_forecast, n},  {pv_actual, n},    {load_forecast, n},
                                 {price_import, n}, {price_export, n}, to_spec(*battery)};
    if (grad) {
      const pvdfl::RegretResult r = pvdfl::regret_and_gradient(in, quad_reg_eps);
      *regret = r.regret;
      std::copy(r.grad.begin(), r.grad.end(), grad);
    } else {
      *regret = pvdfl::regret_only(in, quad_reg_eps, std::nullopt);
    }
  });
}

pvdfl_status pvdfl_model_load(const char* path, pvdfl_model** out) {
  return guarded([&] {
    require(path, out);
    *out = new pvdfl_model{pvdfl::ForecastModel::load(path)};
  });
}

pvdfl_status pvdfl_model_predict(const pvdfl_model* model, const double* pv_hist, const double* dni_forecast,
                                 double* out) {
  return guarded([&] {
    require(model, pv_hist, dni_forecast, out);
    constexpr std::size_t n = pvdfl::kSeqLen;
    const auto window = pvdfl::FeatureWindow::with_hours({pv_hist, n}, {dni_forecast, n});
    const auto fc = model->model.predict(window);
    std::copy(fc.begin(), fc.end(), out);
  });
}

void pvdfl_model_free(pvdfl_model* model) { delete model; }

pvdfl_status pvdfl_dataset_load(const char* dir, pvdfl_dataset** out) {
  return guarded([&] {
    require(dir, out);
    *out = new pvdfl_dataset{pvdfl::load_dataset(dir)};
  });
}

size_t pvdfl_dataset_building_count(const pvdfl_dataset* dataset) {
  return dataset ? dataset->data.buildings.size() : 0;
}

const char* pvdfl_dataset_building_id(const pvdfl_dataset* dataset, size_t index) {
  if (!dataset || index >= dataset->data.buildings.size()) return nullptr;
  return dataset->data.buildings[index].id.c_str();
}

pvdfl_status pvdfl_dataset_battery(const pvdfl_dataset* dataset, size_t index, pvdfl_battery* out) {
  return guarded([&] {
    require(dataset, out);
    if (index >= dataset->data.buildings.size())
      pvdfl::fail(pvdfl::ErrorCode::PreconditionViolated, "building index out of range");
    *out = from_spec(dataset->data.buildings[index].battery);
  });
}

void pvdfl_dataset_free(pvdfl_dataset* dataset) { delete dataset; }

pvdfl_status pvdfl_s_rmse(size_t n, const double* preds, const double* actuals, double* out) {
  return guarded([&] {
    require(preds, actuals, out);
    *out = pvdfl::s_rmse({preds, n}, {actuals, n});
  });
}

pvdfl_status pvdfl_relative_cost(double cost, double perfect_cost, double noopt_cost, double* out) {
  return guarded([&] {
    require(out);
    *out = pvdfl::relative_cost(cost, perfect_cost, noopt_cost);
  });
}

pvdfl_status pvdfl_dm_test(size_t n, const double* losses_a, const double* losses_b, int h, double* dm_stat,
                           double* p_value) {
  return guarded([&] {
    require(losses_a, losses_b);
    const pvdfl::DmResult r = pvdfl::dm_test({losses_a, n}, {losses_b, n}, h);
    if (dm_stat) *dm_stat = r.dm_stat;
    if (p_value) *p_value = r.p_value;
  });
}

}  // extern "C"
