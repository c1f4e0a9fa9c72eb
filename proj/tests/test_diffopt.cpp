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

#include <doctest.h>

#include <random>

#include "common.hpp"
#include "diffopt.hpp"
#include "oracles.hpp"

using namespace pvdfl;
using testing::code_of;

namespace {

DayInstance instance_of(const oracle::Day24& d, const std::vector<double>& pv) {
  return DayInstance{pv, d.load, d.price_import, d.price_export, d.battery};
}

}  // namespace

TEST_CASE("eps = 0 is rejected") {
  std::mt19937_64 rng(1);
  const oracle::Day24 d = oracle::random_day24(rng);
  CHECK(code_of([&] { solve_with_sensitivities(instance_of(d, d.pv_forecast), 0.0); }) ==
        ErrorCode::PreconditionViolated);
}

TEST_CASE("idle optimum has finite sensitivities") {
  const DayInstance d{std::vector<double>(24, 0.0), std::vector<double>(24, 0.0), std::vector<double>(24, 0.3),
                      std::vector<double>(24, 0.2), BatterySpec{}};
  const auto [s, kkt] = solve_with_sensitivities(d, 1e-3);
  for (double v : s.p_ch) CHECK(std::abs(v) < 1e-6);
  const Eigen::MatrixXd J = kkt.pv_jacobian();
  CHECK(J.allFinite());
}

TEST_CASE("pv jacobian matches central differences of the solution") {
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int inst = 0; inst < 10; ++inst) {
    const oracle::Day24 d = oracle::random_day24(rng);
    const DayInstance base = instance_of(d, d.pv_forecast);
    const auto [s, kkt] = solve_with_sensitivities(base, 1e-3);
    const Eigen::MatrixXd J = kkt.pv_jacobian();
    const VariableLayout& L = kkt.layout();
    const double h = 1e-5;
    bool same_set = true;
    double worst = 0.0;
    for (std::size_t t = 0; t < 24 && same_set; ++t) {
      if (d.pv_forecast[t] < h) continue;
      auto p = d.pv_forecast, m = d.pv_forecast;
      p[t] += h;
      m[t] -= h;
      const auto [sp, kp] = solve_with_sensitivities(instance_of(d, p), 1e-3);
      const auto [sm, km] = solve_with_sensitivities(instance_of(d, m), 1e-3);
      if (kp.active_set != kkt.active_set || km.active_set != kkt.active_set) {
        same_set = false;
        break;
      }
      for (std::size_t k = 0; k < 24; ++k) {
        const double fd = (sp.p_ch[k] - sm.p_ch[k]) / (2 * h);
        worst = std::max(worst, std::abs(fd - J(static_cast<Eigen::Index>(L.p_ch(k)), static_cast<Eigen::Index>(t))));
      }
    }
    if (!same_set) continue;
    ++checked;
    CHECK(worst <= 1e-4);
  }
  CHECK(checked >= 5);
}

TEST_CASE("regret gradient matches central differences") {
  std::mt19937_64 rng(31);
  int kept = 0;
  for (int i = 0; i < 10; ++i) {
    const oracle::FdCheck c = oracle::fd_regret_check(oracle::random_day24(rng), 1e-3);
    if (c.excluded) continue;
    ++kept;
    CHECK(c.pass);
  }
  CHECK(kept >= 8);
}

TEST_CASE("perfect forecast has near-zero regret") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 10; ++i) {
    oracle::Day24 d = oracle::random_day24(rng);
    d.pv_forecast = d.pv_actual;
    const RegretResult r = regret_and_gradient(d.inputs(), 1e-3);
    // the forecast solve carries the small quadratic term, the baseline not
    CHECK(r.regret >= -1e-6);
    CHECK(r.regret <= 0.02);
    CHECK(regret_only(d.inputs(), 1e-3) == doctest::Approx(r.regret).epsilon(1e-5));
  }
}

TEST_CASE("over-forecasting a sunny day costs money") {
  std::mt19937_64 rng(51);
  oracle::Day24 d = oracle::random_day24(rng);
  for (int t = 0; t < 24; ++t) {
    const double env = (t > 5 && t < 20) ? std::sin(3.14159265358979 * (t - 5) / 15.0) : 0.0;
    d.pv_actual[t] = 3.5 * env;
    d.pv_forecast[t] = d.pv_actual[t] + 0.5;
  }
  CHECK(regret_and_gradient(d.inputs(), 1e-3).regret > 0.0);
}

TEST_CASE("gradients are bit-identical across calls") {
  std::mt19937_64 rng(61);
  const oracle::Day24 d = oracle::random_day24(rng);
  const RegretResult a = regret_and_gradient(d.inputs(), 1e-3);
  const RegretResult b = regret_and_gradient(d.inputs(), 1e-3);
  CHECK(a.grad == b.grad);
  CHECK(a.regret == b.regret);
}

TEST_CASE("cached perfect cost is used as given") {
  std::mt19937_64 rng(71);
  const oracle::Day24 d = oracle::random_day24(rng);
  const double perfect = perfect_cost(d.inputs());
  const RegretResult a = regret_and_gradient(d.inputs(), 1e-3, perfect + 1.0);
  const RegretResult b = regret_and_gradient(d.inputs(), 1e-3, perfect);
  CHECK(a.regret == doctest::Approx(b.regret - 1.0));
  CHECK(a.grad == b.grad);
}
