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

#include "metrics.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"

namespace pvdfl {

double s_rmse(std::span<const double> preds, std::span<const double> actuals) {
  if (preds.size() != actuals.size() || preds.empty())
    fail(ErrorCode::LengthMismatch, "S-RMSE needs equal, non-empty series");
  double peak = 0.0, se = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    peak = std::max(peak, actuals[i]);
    se += (preds[i] - actuals[i]) * (preds[i] - actuals[i]);
  }
  if (!(peak > 0.0)) fail(ErrorCode::ZeroMaxPv, "S-RMSE is undefined when actual PV never exceeds 0");
  return 100.0 * std::sqrt(se / static_cast<double>(preds.size())) / peak;
}

double relative_cost(double cost, double perfect_cost, double noopt_cost) {
  if (!(noopt_cost > perfect_cost + 1e-9))
    fail(ErrorCode::DegenerateScale, "no-optimization cost does not exceed the perfect cost");
  return 100.0 * (cost - perfect_cost) / (noopt_cost - perfect_cost);
}

DmResult dm_test(std::span<const double> losses_a, std::span<const double> losses_b, int h) {
  if (losses_a.size() != losses_b.size()) fail(ErrorCode::LengthMismatch, "DM series lengths differ");
  const std::size_t n = losses_a.size();
  if (n < 10) fail(ErrorCode::PreconditionViolated, "DM test needs at least 10 observations");
  if (h < 1) fail(ErrorCode::PreconditionViolated, "DM horizon must be >= 1");
  std::vector<double> d(n);
  double mean = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    d[t] = losses_a[t] - losses_b[t];
    mean += d[t];
  }
  mean /= static_cast<double>(n);
  const auto gamma = [&](std::size_t k) {
    double acc = 0.0;
    for (std::size_t t = k; t < n; ++t) acc += (d[t] - mean) * (d[t - k] - mean);
    return acc / static_cast<double>(n);
  };
  double var = gamma(0);
  for (int k = 1; k < h && static_cast<std::size_t>(k) < n; ++k) var += 2.0 * gamma(static_cast<std::size_t>(k));
  if (!(var > 1e-15)) fail(ErrorCode::ZeroVariance, "loss differential has no variance");
  DmResult r;
  r.observations = n;
  r.dm_stat = mean / std::sqrt(var / static_cast<double>(n));
  r.p_value = std::erfc(std::abs(r.dm_stat) / std::sqrt(2.0));
  return r;
}

DmResult pooled_dm(const std::map<std::string, std::map<std::string, std::vector<double>>>& per_building,
                   const std::string& model_a, const std::string& model_b, int h) {
  if (per_building.size() < 2) fail(ErrorCode::PreconditionViolated, "pooled DM needs at least two buildings");
  std::vector<double> a, b;
  int significant = 0;
  for (const auto& [id, models] : per_building) {
    const auto ia = models.find(model_a), ib = models.find(model_b);
    if (ia == models.end() || ib == models.end())
      fail(ErrorCode::PreconditionViolated, "building " + id + " lacks " + model_a + " or " + model_b);
    a.insert(a.end(), ib->second.begin(), ib->second.end());
    b.insert(b.end(), ia->second.begin(), ia->second.end());
    try {
      if (dm_test(ib->second, ia->second, h).p_value < 0.05) ++significant;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
    }
  }
  DmResult r = dm_test(a, b, h);
  r.model_a = model_a;
  r.model_b = model_b;
  r.per_building_significant = significant;
  return r;
}

}  // namespace pvdfl
