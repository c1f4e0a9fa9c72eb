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

#include <optional>
#include <span>

#include "domain.hpp"
#include "ipm.hpp"
#include "lp.hpp"

namespace pvdfl {

struct SolveOptions {
  std::optional<double> soc_min_frac_override;
  std::optional<double> soc_max_frac_override;
  double quad_reg_eps = 0.0;  // 0 keeps the problem a pure LP
  double tolerance = 1e-8;
  int max_iterations = 200;

  /// SoC window widened to 10%..90%, used whenever a schedule computed on a
  /// forecast is replayed against actuals.
  static SolveOptions relaxed();

  void validate() const;  // throws PreconditionViolated
};

/// The day-ahead PV-battery problem in standard form; horizon is taken from
/// the instance. The objective is the grid cost plus
/// quad_reg_eps * ||(p_im, p_ex, p_ch, p_dis)||^2.
StandardFormLP build_problem(const DayInstance& instance, const SolveOptions& options = {});

/// Optimal schedule. `cost` is the grid cost only, regardless of the
/// regularization term.
Schedule solve_day(const DayInstance& instance, const SolveOptions& options = {});

/// Removes equal simultaneous charge and discharge at every hour. Balance,
/// SoC and grid cost are unchanged; the quadratic term only decreases. The
/// interior-point method approaches these zeros slowly because both bounds
/// are degenerate when the battery idles.
void cancel_simultaneous_flows(const VariableLayout& layout, Eigen::VectorXd& x);

/// Maps an interior-point solution of build_problem() back to a schedule.
Schedule schedule_from_solution(const DayInstance& instance, const StandardFormLP& lp, const Eigen::VectorXd& x);

struct FixedEvaluation {
  double cost = 0.0;
  Schedule schedule;
};

/// Replays a frozen charge/discharge plan against `actual`: grid exchange is
/// re-optimized hour by hour, which for price_import >= price_export means
/// importing the net deficit and exporting the net surplus. Throws
/// ScheduleInfeasible if the SoC trajectory leaves the (relaxed) window or
/// does not return to the initial state, PreconditionViolated on negative or
/// over-limit powers.
FixedEvaluation evaluate_fixed_schedule(const DayInstance& actual, std::span<const double> p_ch,
                                        std::span<const double> p_dis,
                                        const SolveOptions& options = SolveOptions::relaxed());

/// Cost without a battery: net deficit bought, net surplus sold.
double no_opt_cost(const DayInstance& instance);

}  // namespace pvdfl
