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

#include <map>
#include <span>
#include <string>
#include <vector>

namespace pvdfl {

/// 100 * RMSE / max(actuals). Throws ZeroMaxPv.
double s_rmse(std::span<const double> preds, std::span<const double> actuals);

/// Position of `cost` on the scale perfect = 0, no optimization = 100.
/// Throws DegenerateScale.
double relative_cost(double cost, double perfect_cost, double noopt_cost);

struct DmResult {
  std::string model_a;
  std::string model_b;
  double dm_stat = 0.0;
  double p_value = 1.0;
  int per_building_significant = 0;
  std::size_t observations = 0;
};

/// Diebold-Mariano statistic of the loss differential d = a - b with a
/// long-run variance over h - 1 autocovariance lags. Two-sided normal p.
DmResult dm_test(std::span<const double> losses_a, std::span<const double> losses_b, int h = 1);

/// Pooled test over buildings for "model_a vs model_b". The differential is
/// losses[model_b] - losses[model_a], so a negative statistic means model_a
/// has the higher losses. Also counts buildings significant at p < 0.05.
DmResult pooled_dm(const std::map<std::string, std::map<std::string, std::vector<double>>>& per_building,
                   const std::string& model_a, const std::string& model_b, int h = 1);

}  // namespace pvdfl
