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

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "domain.hpp"
#include "ipm.hpp"
#include "sched.hpp"

namespace pvdfl {

/// Interior-point tolerance used for solves that are differentiated. Tighter
/// than the scheduling default so that finite differences of the pipeline
/// resolve the derivative.
inline constexpr double kSensitivityTolerance = 1e-10;

/// Optimal point of the regularized problem together with the factorized
/// linearization of its KKT conditions. Active inequalities are held as
/// equalities (stiff penalty), inactive ones are dropped.
class KktFactorization {
 public:
  Schedule solution;
  Eigen::VectorXd x;
  Eigen::VectorXd dual_eq;
  Eigen::VectorXd dual_ineq;
  Eigen::VectorXd slack;
  std::vector<char> active_set;
  double damping = 0.0;

  double stationarity_residual() const noexcept { return stationarity_; }
  double complementarity() const noexcept { return complementarity_; }

  /// dx for a perturbation `d_rhs` of the equality right-hand side.
  Eigen::VectorXd rhs_sensitivity(const Eigen::VectorXd& d_rhs) const;

  /// d x / d pv, one column per hour (variable_count x horizon).
  Eigen::MatrixXd pv_jacobian() const;

  /// g' dx/dpv for a fixed cost gradient g over x (one adjoint solve).
  Eigen::VectorXd pv_vjp(const Eigen::VectorXd& g) const;

  const VariableLayout& layout() const noexcept { return layout_; }

 private:
  friend std::pair<Schedule, KktFactorization> solve_with_sensitivities(const DayInstance&, double,
                                                                        const SolveOptions&);
  VariableLayout layout_;
  Eigen::Index equality_rows_ = 0;
  std::optional<ReducedKkt> kkt_;
  double stationarity_ = 0.0;
  double complementarity_ = 0.0;
};

/// Solves the problem with quad_reg_eps = eps > 0 and factorizes the KKT
/// system at the optimum. Throws PreconditionViolated for eps <= 0 and
/// SingularKkt when the system stays singular after damping.
std::pair<Schedule, KktFactorization> solve_with_sensitivities(const DayInstance& instance, double quad_reg_eps,
                                                               const SolveOptions& base = {});

struct RegretInputs {
  std::span<const double> pv_forecast;
  std::span<const double> pv_actual;
  std::span<const double> load_forecast;
  std::span<const double> price_import;
  std::span<const double> price_export;
  BatterySpec battery;
};

struct RegretResult {
  double regret = 0.0;
  double cost_fixed = 0.0;
  double cost_perfect = 0.0;
  std::vector<double> grad;  // d cost_fixed / d pv_forecast
  Schedule schedule;         // forecast solve, before replay
  double damping = 0.0;
};

/// Cost of the perfect-information solve (pure LP) on actual PV and the load
/// forecast. Constant in the PV forecast, so callers may cache it.
double perfect_cost(const RegretInputs& in);

/// Regret of the forecast-driven schedule and its gradient with respect to
/// the PV forecast. `cached_perfect` skips the perfect-information solve.
RegretResult regret_and_gradient(const RegretInputs& in, double quad_reg_eps,
                                 std::optional<double> cached_perfect = std::nullopt, bool with_gradient = true);

/// Regret alone, solving the forecast instance at the scheduling default
/// tolerance. Used for epoch selection where no gradient is needed.
double regret_only(const RegretInputs& in, double quad_reg_eps, std::optional<double> cached_perfect = std::nullopt);

/// Comparable signature of the solve at `in`: active-set mask of the forecast
/// solve followed by the sign of the replayed net demand per hour. Finite
/// differences are only meaningful where this does not change.
std::vector<char> regret_regime(const RegretInputs& in, double quad_reg_eps);

}  // namespace pvdfl
