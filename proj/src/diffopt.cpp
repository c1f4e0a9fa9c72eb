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

#include "diffopt.hpp"

#include <cmath>

#include "error.hpp"

namespace pvdfl {

namespace {

// Rows with a slack below this are held fixed in the sensitivity system.
constexpr double kActiveSlack = 1e-7;
// Weight standing in for z/s -> infinity on active rows.
constexpr double kActivePenalty = 1e8;

DayInstance make_instance(std::span<const double> pv, const RegretInputs& in) {
  DayInstance d;
  d.pv.assign(pv.begin(), pv.end());
  d.load.assign(in.load_forecast.begin(), in.load_forecast.end());
  d.price_import.assign(in.price_import.begin(), in.price_import.end());
  d.price_export.assign(in.price_export.begin(), in.price_export.end());
  d.battery = in.battery;
  return d;
}

void check_lengths(const RegretInputs& in) {
  const std::size_t t = in.pv_forecast.size();
  if (in.pv_actual.size() != t || in.load_forecast.size() != t || in.price_import.size() != t ||
      in.price_export.size() != t)
    fail(ErrorCode::LengthMismatch, "regret inputs must share one horizon");
}

// Marginal replay cost of one extra kWh of charge at each hour.
std::vector<double> replay_slopes(const RegretInputs& in, const Schedule& replay) {
  std::vector<double> slope(in.pv_actual.size());
  for (std::size_t t = 0; t < slope.size(); ++t) {
    const double net = in.load_forecast[t] + replay.p_ch[t] - in.pv_actual[t] - replay.p_dis[t];
    slope[t] = net > 0.0 ? in.price_import[t] : (net < 0.0 ? in.price_export[t] : 0.0);
  }
  return slope;
}

}  // namespace

Eigen::VectorXd KktFactorization::rhs_sensitivity(const Eigen::VectorXd& d_rhs) const {
  if (!kkt_) fail(ErrorCode::PreconditionViolated, "factorization is empty");
  if (d_rhs.size() != equality_rows_) fail(ErrorCode::LengthMismatch, "rhs perturbation has the wrong length");
  Eigen::VectorXd dx, dy;
  kkt_->solve(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.variable_count())), d_rhs, dx, dy);
  return dx;
}

Eigen::MatrixXd KktFactorization::pv_jacobian() const {
  const std::size_t T = layout_.horizon;
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(layout_.variable_count()), static_cast<Eigen::Index>(T));
  Eigen::VectorXd db = Eigen::VectorXd::Zero(equality_rows_);
  for (std::size_t t = 0; t < T; ++t) {
    // balance rhs is load - pv
    db[static_cast<Eigen::Index>(t)] = -1.0;
    jac.col(static_cast<Eigen::Index>(t)) = rhs_sensitivity(db);
    db[static_cast<Eigen::Index>(t)] = 0.0;
  }
  return jac;
}

Eigen::VectorXd KktFactorization::pv_vjp(const Eigen::VectorXd& g) const {
  if (!kkt_) fail(ErrorCode::PreconditionViolated, "factorization is empty");
  // The system is symmetric: g' K^-1 [0; db] = v' db with K [u; v] = [g; 0].
  Eigen::VectorXd u, v;
  kkt_->solve(g, Eigen::VectorXd::Zero(equality_rows_), u, v);
  return -v.head(static_cast<Eigen::Index>(layout_.horizon));
}

std::pair<Schedule, KktFactorization> solve_with_sensitivities(const DayInstance& instance, double quad_reg_eps,
                                                               const SolveOptions& base) {
  if (!(quad_reg_eps > 0.0))
    fail(ErrorCode::PreconditionViolated, "sensitivities need quad_reg_eps > 0 for a unique solution map");
  const DayInstance inst = validate_day_instance(instance, instance.horizon());
  SolveOptions opts = base;
  opts.quad_reg_eps = quad_reg_eps;
  opts.tolerance = std::min(opts.tolerance, kSensitivityTolerance);
  const StandardFormLP lp = build_problem(inst, opts);
  const auto pattern = std::make_shared<const KktPattern>(KktPattern::from(lp));
  QpSolution sol = solve_qp(lp, pattern, QpSettings{opts.tolerance, opts.max_iterations});
  cancel_simultaneous_flows(lp.variable_layout, sol.x);

  KktFactorization f;
  f.layout_ = lp.variable_layout;
  f.equality_rows_ = lp.equality_matrix.rows();
  f.x = sol.x;
  f.dual_eq = sol.y;
  f.dual_ineq = sol.z;
  Eigen::VectorXd gx;
  pattern->g_rows.multiply(sol.x, gx);
  f.slack = lp.inequality_rhs - gx;
  const Eigen::Index m = f.slack.size();
  f.active_set.assign(static_cast<std::size_t>(m), 0);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i)
    if (f.slack[i] <= kActiveSlack) {
      f.active_set[static_cast<std::size_t>(i)] = 1;
      w[i] = kActivePenalty;
    }

  // The mode column is free wherever neither power limit binds, so the
  // undamped system is usually singular there.
  for (double damping : {0.0, 1e-8}) {
    f.kkt_ = ReducedKkt::factorize(lp, pattern, w, damping);
    if (f.kkt_) {
      f.damping = damping;
      break;
    }
  }
  if (!f.kkt_) fail(ErrorCode::SingularKkt, "KKT system singular after damping");

  Eigen::VectorXd aty, gtz;
  pattern->a_rows.multiply_transpose(sol.y, aty);
  pattern->g_rows.multiply_transpose(sol.z, gtz);
  f.stationarity_ = (lp.quad_diag.cwiseProduct(sol.x) + lp.cost_vector + aty + gtz).lpNorm<Eigen::Infinity>();
  f.complementarity_ = f.slack.cwiseProduct(f.dual_ineq).cwiseAbs().maxCoeff();

  f.solution = schedule_from_solution(inst, lp, sol.x);
  Schedule s = f.solution;
  return {std::move(s), std::move(f)};
}

double perfect_cost(const RegretInputs& in) {
  check_lengths(in);
  return solve_day(make_instance(in.pv_actual, in)).cost;
}

RegretResult regret_and_gradient(const RegretInputs& in, double quad_reg_eps, std::optional<double> cached_perfect,
                                 bool with_gradient) {
  check_lengths(in);
  const DayInstance forecast = make_instance(in.pv_forecast, in);
  const DayInstance actual = make_instance(in.pv_actual, in);
  auto [schedule, kkt] = solve_with_sensitivities(forecast, quad_reg_eps);
  const FixedEvaluation replay = evaluate_fixed_schedule(actual, schedule.p_ch, schedule.p_dis);

  RegretResult out;
  out.cost_fixed = replay.cost;
  out.cost_perfect = cached_perfect ? *cached_perfect : perfect_cost(in);
  out.regret = out.cost_fixed - out.cost_perfect;
  out.damping = kkt.damping;
  if (with_gradient) {
    const std::vector<double> slope = replay_slopes(in, replay.schedule);
    const VariableLayout& v = kkt.layout();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(v.variable_count()));
    for (std::size_t t = 0; t < v.horizon; ++t) {
      g[static_cast<Eigen::Index>(v.p_ch(t))] = slope[t];
      g[static_cast<Eigen::Index>(v.p_dis(t))] = -slope[t];
    }
    const Eigen::VectorXd grad = kkt.pv_vjp(g);
    out.grad.assign(grad.begin(), grad.end());
  }
  out.schedule = std::move(schedule);
  return out;
}

double regret_only(const RegretInputs& in, double quad_reg_eps, std::optional<double> cached_perfect) {
  check_lengths(in);
  SolveOptions opts;
  opts.quad_reg_eps = quad_reg_eps;
  const Schedule s = solve_day(make_instance(in.pv_forecast, in), opts);
  const double fixed = evaluate_fixed_schedule(make_instance(in.pv_actual, in), s.p_ch, s.p_dis).cost;
  return fixed - (cached_perfect ? *cached_perfect : perfect_cost(in));
}

std::vector<char> regret_regime(const RegretInputs& in, double quad_reg_eps) {
  check_lengths(in);
  const auto [schedule, kkt] = solve_with_sensitivities(make_instance(in.pv_forecast, in), quad_reg_eps);
  const FixedEvaluation replay =
      evaluate_fixed_schedule(make_instance(in.pv_actual, in), schedule.p_ch, schedule.p_dis);
  std::vector<char> sig = kkt.active_set;
  for (std::size_t t = 0; t < in.pv_actual.size(); ++t) {
    const double net = in.load_forecast[t] + replay.schedule.p_ch[t] - in.pv_actual[t] - replay.schedule.p_dis[t];
    sig.push_back(static_cast<char>(net > 0.0 ? 1 : (net < 0.0 ? 2 : 0)));
  }
  return sig;
}

}  // namespace pvdfl
