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

#include "sched.hpp"

#include <algorithm>
#include <cmath>

namespace pvdfl {

SolveOptions SolveOptions::relaxed() {
  SolveOptions o;
  o.soc_min_frac_override = 0.1;
  o.soc_max_frac_override = 0.9;
  return o;
}

void SolveOptions::validate() const {
  const double lo = soc_min_frac_override.value_or(0.0);
  const double hi = soc_max_frac_override.value_or(1.0);
  if (soc_min_frac_override && soc_max_frac_override && !(lo < hi))
    fail(ErrorCode::PreconditionViolated, "SoC override min must be below max");
  if (lo < 0.0 || hi > 1.0) fail(ErrorCode::PreconditionViolated, "SoC overrides must lie in [0,1]");
  if (!(quad_reg_eps >= 0.0)) fail(ErrorCode::PreconditionViolated, "quad_reg_eps must be >= 0");
  if (!(tolerance > 0.0)) fail(ErrorCode::PreconditionViolated, "tolerance must be > 0");
  if (max_iterations <= 0) fail(ErrorCode::PreconditionViolated, "max_iterations must be > 0");
}

StandardFormLP build_problem(const DayInstance& instance, const SolveOptions& options) {
  options.validate();
  const std::size_t T = instance.horizon();
  const BatterySpec& bat = instance.battery;
  const double pmax = bat.max_power();
  const double soc_lo = options.soc_min_frac_override.value_or(bat.soc_min_frac) * bat.capacity_kwh;
  const double soc_hi = options.soc_max_frac_override.value_or(bat.soc_max_frac) * bat.capacity_kwh;
  const double soc_init = bat.soc_init_kwh();

  StandardFormLP lp;
  lp.variable_layout.horizon = T;
  const VariableLayout& v = lp.variable_layout;
  const auto n = static_cast<Eigen::Index>(v.variable_count());
  lp.variable_count = v.variable_count();
  const auto idx = [](std::size_t i) { return static_cast<Eigen::Index>(i); };

  lp.cost_vector = Eigen::VectorXd::Zero(n);
  for (std::size_t t = 0; t < T; ++t) {
    lp.cost_vector[idx(v.p_im(t))] = instance.price_import[t];
    lp.cost_vector[idx(v.p_ex(t))] = -instance.price_export[t];
  }
  lp.quad_diag = Eigen::VectorXd::Zero(n);
  if (options.quad_reg_eps > 0.0)
    lp.quad_diag.head(idx(4 * T)).setConstant(2.0 * options.quad_reg_eps);

  const auto meq = idx(2 * T + 2);
  lp.equality_matrix = Eigen::MatrixXd::Zero(meq, n);
  lp.equality_rhs = Eigen::VectorXd::Zero(meq);
  auto& A = lp.equality_matrix;
  auto& b = lp.equality_rhs;
  for (std::size_t t = 0; t < T; ++t) {
    // pv + p_im + p_dis = p_ex + load + p_ch
    const auto r = idx(t);
    A(r, idx(v.p_im(t))) = 1.0;
    A(r, idx(v.p_ex(t))) = -1.0;
    A(r, idx(v.p_ch(t))) = -1.0;
    A(r, idx(v.p_dis(t))) = 1.0;
    b[r] = instance.load[t] - instance.pv[t];
  }
  A(idx(T), idx(v.soc(0))) = 1.0;
  b[idx(T)] = soc_init;
  for (std::size_t t = 0; t < T; ++t) {
    const auto r = idx(T + 1 + t);
    A(r, idx(v.soc(t + 1))) = 1.0;
    A(r, idx(v.soc(t))) = -1.0;
    A(r, idx(v.p_ch(t))) = -1.0;
    A(r, idx(v.p_dis(t))) = 1.0;
  }
  A(idx(2 * T + 1), idx(v.soc(T))) = 1.0;
  b[idx(2 * T + 1)] = soc_init;

  const auto mineq = idx(10 * T + 2);
  lp.inequality_matrix = Eigen::MatrixXd::Zero(mineq, n);
  lp.inequality_rhs = Eigen::VectorXd::Zero(mineq);
  auto& G = lp.inequality_matrix;
  auto& h = lp.inequality_rhs;
  Eigen::Index r = 0;
  for (std::size_t col = 0; col < 4 * T; ++col) G(r++, idx(col)) = -1.0;
  for (std::size_t t = 0; t < T; ++t, ++r) {
    G(r, idx(v.p_ch(t))) = 1.0;
    G(r, idx(v.mode(t))) = -pmax;
  }
  for (std::size_t t = 0; t < T; ++t, ++r) {
    G(r, idx(v.p_dis(t))) = 1.0;
    G(r, idx(v.mode(t))) = pmax;
    h[r] = pmax;
  }
  for (std::size_t t = 0; t < T; ++t) G(r++, idx(v.mode(t))) = -1.0;
  for (std::size_t t = 0; t < T; ++t, ++r) {
    G(r, idx(v.mode(t))) = 1.0;
    h[r] = 1.0;
  }
  for (std::size_t t = 0; t <= T; ++t, ++r) {
    G(r, idx(v.soc(t))) = -1.0;
    h[r] = -soc_lo;
  }
  for (std::size_t t = 0; t <= T; ++t, ++r) {
    G(r, idx(v.soc(t))) = 1.0;
    h[r] = soc_hi;
  }
  return lp;
}

Schedule schedule_from_solution(const DayInstance& instance, const StandardFormLP& lp, const Eigen::VectorXd& x) {
  const VariableLayout& v = lp.variable_layout;
  const std::size_t T = v.horizon;
  const auto at = [&](std::size_t i) { return x[static_cast<Eigen::Index>(i)]; };
  Schedule s;
  s.p_im.resize(T);
  s.p_ex.resize(T);
  s.p_ch.resize(T);
  s.p_dis.resize(T);
  s.mode.resize(T);
  s.soc.resize(T + 1);
  for (std::size_t t = 0; t < T; ++t) {
    s.p_im[t] = at(v.p_im(t));
    s.p_ex[t] = at(v.p_ex(t));
    s.p_ch[t] = at(v.p_ch(t));
    s.p_dis[t] = at(v.p_dis(t));
    s.mode[t] = at(v.mode(t));
  }
  for (std::size_t t = 0; t <= T; ++t) s.soc[t] = at(v.soc(t));
  s.cost = grid_cost(s.p_im, s.p_ex, instance.price_import, instance.price_export);
  return s;
}

void cancel_simultaneous_flows(const VariableLayout& layout, Eigen::VectorXd& x) {
  for (std::size_t t = 0; t < layout.horizon; ++t) {
    double& ch = x[static_cast<Eigen::Index>(layout.p_ch(t))];
    double& dis = x[static_cast<Eigen::Index>(layout.p_dis(t))];
    const double common = std::max(std::min(ch, dis), 0.0);
    ch = std::max(ch - common, 0.0);
    dis = std::max(dis - common, 0.0);
  }
}

Schedule solve_day(const DayInstance& instance, const SolveOptions& options) {
  const DayInstance inst = validate_day_instance(instance, instance.horizon());
  const StandardFormLP lp = build_problem(inst, options);
  QpSolution sol = solve_qp(lp, QpSettings{options.tolerance, options.max_iterations});
  cancel_simultaneous_flows(lp.variable_layout, sol.x);
  return schedule_from_solution(inst, lp, sol.x);
}

FixedEvaluation evaluate_fixed_schedule(const DayInstance& actual, std::span<const double> p_ch,
                                        std::span<const double> p_dis, const SolveOptions& options) {
  options.validate();
  const DayInstance inst = validate_day_instance(actual, actual.horizon());
  const std::size_t T = inst.horizon();
  if (p_ch.size() != T || p_dis.size() != T)
    fail(ErrorCode::LengthMismatch, "frozen schedule length differs from the instance horizon");

  constexpr double kTol = 1e-6;
  const BatterySpec& bat = inst.battery;
  const double pmax = bat.max_power();
  const double soc_lo = options.soc_min_frac_override.value_or(bat.soc_min_frac) * bat.capacity_kwh;
  const double soc_hi = options.soc_max_frac_override.value_or(bat.soc_max_frac) * bat.capacity_kwh;

  FixedEvaluation out;
  Schedule& s = out.schedule;
  s.p_ch.resize(T);
  s.p_dis.resize(T);
  s.p_im.resize(T);
  s.p_ex.resize(T);
  s.mode.resize(T);
  s.soc.resize(T + 1);
  s.soc[0] = bat.soc_init_kwh();
  for (std::size_t t = 0; t < T; ++t) {
    if (!(p_ch[t] >= -kTol) || !(p_dis[t] >= -kTol))
      fail(ErrorCode::PreconditionViolated, "negative frozen power at hour " + std::to_string(t));
    const double ch = std::max(p_ch[t], 0.0);
    const double dis = std::max(p_dis[t], 0.0);
    if (ch + dis > pmax + kTol)
      fail(ErrorCode::PreconditionViolated, "frozen powers exceed the battery limit at hour " + std::to_string(t));
    s.p_ch[t] = ch;
    s.p_dis[t] = dis;
    // Any mode in [ch/pmax, 1 - dis/pmax] is feasible; take the midpoint.
    s.mode[t] = std::clamp(0.5 * (ch / pmax + 1.0 - dis / pmax), 0.0, 1.0);
    s.soc[t + 1] = s.soc[t] + ch - dis;
    if (s.soc[t + 1] < soc_lo - kTol || s.soc[t + 1] > soc_hi + kTol)
      fail(ErrorCode::ScheduleInfeasible, "SoC " + std::to_string(s.soc[t + 1]) + " leaves [" +
                                              std::to_string(soc_lo) + ", " + std::to_string(soc_hi) +
                                              "] after hour " + std::to_string(t));
    const double net = inst.load[t] + ch - inst.pv[t] - dis;
    s.p_im[t] = std::max(net, 0.0);
    s.p_ex[t] = std::max(-net, 0.0);
  }
  if (std::abs(s.soc[T] - bat.soc_init_kwh()) > kTol)
    fail(ErrorCode::ScheduleInfeasible, "frozen schedule does not return the battery to its initial SoC");
  s.cost = grid_cost(s.p_im, s.p_ex, inst.price_import, inst.price_export);
  out.cost = s.cost;
  return out;
}

double no_opt_cost(const DayInstance& instance) {
  const DayInstance inst = validate_day_instance(instance, instance.horizon());
  double cost = 0.0;
  for (std::size_t t = 0; t < inst.horizon(); ++t) {
    const double net = inst.load[t] - inst.pv[t];
    cost += std::max(net, 0.0) * inst.price_import[t] - std::max(-net, 0.0) * inst.price_export[t];
  }
  return cost;
}

}  // namespace pvdfl
