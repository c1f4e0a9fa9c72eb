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

// Reference computations that share no code with the library solvers.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "diffopt.hpp"
#include "domain.hpp"
#include "forecast.hpp"

namespace oracle {

/// Grid cost of hour t with net battery flow b (charge positive): the
/// deficit is bought, the surplus sold.
inline double hour_cost(const pvdfl::DayInstance& in, std::size_t t, double b) {
  const double net = in.load[t] - in.pv[t] + b;
  return net > 0.0 ? in.price_import[t] * net : in.price_export[t] * net;
}

/// Exact optimum of the 4-hour problem by enumerating every vertex of the
/// hyperplane arrangement in (b1, b2, b3), with b4 = -(b1 + b2 + b3). The
/// cost is convex piecewise linear on a bounded polytope, so some vertex is
/// optimal.
inline double brute_force_cost4(const pvdfl::DayInstance& in) {
  const auto& bat = in.battery;
  const double P = bat.max_power();
  const double lo = bat.soc_min_frac * bat.capacity_kwh, hi = bat.soc_max_frac * bat.capacity_kwh;
  const double init = bat.soc_init_kwh();
  struct Plane {
    std::array<double, 3> a;
    double c;
  };
  std::vector<Plane> planes;
  for (int t = 0; t < 3; ++t) {
    std::array<double, 3> a{0, 0, 0};
    a[t] = 1.0;
    for (double c : {-P, P, in.pv[t] - in.load[t]}) planes.push_back({a, c});
  }
  for (double c : {-P, P, in.pv[3] - in.load[3]}) planes.push_back({{1, 1, 1}, -c});
  for (int k = 0; k < 3; ++k) {
    std::array<double, 3> a{0, 0, 0};
    for (int i = 0; i <= k; ++i) a[i] = 1.0;
    for (double bound : {lo, hi}) planes.push_back({a, bound - init});
  }
  const auto feasible = [&](const std::array<double, 4>& b) {
    double soc = init;
    for (int t = 0; t < 4; ++t) {
      if (std::abs(b[t]) > P + 1e-9) return false;
      soc += b[t];
      if (soc < lo - 1e-9 || soc > hi + 1e-9) return false;
    }
    return true;
  };
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = planes.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        const auto& A = planes[i].a;
        const auto& B = planes[j].a;
        const auto& C = planes[k].a;
        const double det = A[0] * (B[1] * C[2] - B[2] * C[1]) - A[1] * (B[0] * C[2] - B[2] * C[0]) +
                           A[2] * (B[0] * C[1] - B[1] * C[0]);
        if (std::abs(det) < 1e-12) continue;
        const double r[3] = {planes[i].c, planes[j].c, planes[k].c};
        // Cramer's rule
        std::array<double, 4> b{};
        for (int col = 0; col < 3; ++col) {
          double m[3][3] = {{A[0], A[1], A[2]}, {B[0], B[1], B[2]}, {C[0], C[1], C[2]}};
          for (int row = 0; row < 3; ++row) m[row][col] = r[row];
          b[col] = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                    m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                    m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])) /
                   det;
        }
        b[3] = -(b[0] + b[1] + b[2]);
        if (!feasible(b)) continue;
        double cost = 0.0;
        for (int t = 0; t < 4; ++t) cost += hour_cost(in, static_cast<std::size_t>(t), b[t]);
        best = std::min(best, cost);
      }
  return best;
}

inline pvdfl::DayInstance random_instance4(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  pvdfl::DayInstance in;
  in.battery.capacity_kwh = 2.0 + 8.0 * U(rng);
  for (int t = 0; t < 4; ++t) {
    in.pv.push_back(U(rng) < 0.3 ? 0.0 : 4.0 * U(rng));
    in.load.push_back(0.2 + 2.0 * U(rng));
    const double im = 0.15 + 0.3 * U(rng);
    in.price_import.push_back(im);
    in.price_export.push_back(im * (0.2 + 0.8 * U(rng)));
  }
  return in;
}

/// A 24-hour day with a solar bell, noisy forecast and varying prices.
struct Day24 {
  std::vector<double> pv_actual, pv_forecast, load, price_import, price_export;
  pvdfl::BatterySpec battery;

  pvdfl::RegretInputs inputs() const {
    return {pv_forecast, pv_actual, load, price_import, price_export, battery};
  }
};

inline Day24 random_day24(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);
  Day24 d;
  d.battery.capacity_kwh = 3.0 + 5.0 * U(rng);
  for (int t = 0; t < 24; ++t) {
    const double env = (t > 5 && t < 20) ? std::sin(3.14159265358979 * (t - 5) / 15.0) : 0.0;
    const double pv = 4.0 * env * U(rng);
    d.pv_actual.push_back(pv);
    d.pv_forecast.push_back(env > 0.0 ? std::max(0.05, pv + 0.5 * N(rng)) : 0.0);
    d.load.push_back(0.2 + 0.8 * U(rng));
    const double im = 0.25 + 0.1 * std::sin(t / 3.0) + 0.05 * U(rng);
    d.price_import.push_back(im);
    d.price_export.push_back(im - 0.15);
  }
  return d;
}

struct FdCheck {
  bool excluded = false;  // the stencil crossed an active-set or kink change
  bool pass = true;
  double worst_ratio = 0.0;  // max error / tolerance
};

/// Central differences of the regret against the adjoint gradient. Hours
/// whose forecast is below the step are skipped (the stencil would leave
/// the domain PV >= 0).
inline FdCheck fd_regret_check(const Day24& day, double eps, double h = 1e-4, double rel_tol = 1e-3,
                               double abs_floor = 1e-6) {
  const pvdfl::RegretInputs in = day.inputs();
  const double perfect = pvdfl::perfect_cost(in);
  const pvdfl::RegretResult r = pvdfl::regret_and_gradient(in, eps, perfect);
  const std::vector<char> regime = pvdfl::regret_regime(in, eps);
  FdCheck out;
  for (std::size_t t = 0; t < 24; ++t) {
    if (day.pv_forecast[t] < h) continue;
    auto plus = day.pv_forecast, minus = day.pv_forecast;
    plus[t] += h;
    minus[t] -= h;
    pvdfl::RegretInputs ip = in, im = in;
    ip.pv_forecast = plus;
    im.pv_forecast = minus;
    if (pvdfl::regret_regime(ip, eps) != regime || pvdfl::regret_regime(im, eps) != regime) {
      out.excluded = true;
      return out;
    }
    const double fd = (pvdfl::regret_and_gradient(ip, eps, perfect, false).regret -
                       pvdfl::regret_and_gradient(im, eps, perfect, false).regret) /
                      (2.0 * h);
    const double tol = std::max(rel_tol * std::abs(fd), abs_floor);
    const double err = std::abs(fd - r.grad[t]);
    out.worst_ratio = std::max(out.worst_ratio, err / tol);
    if (err > tol) out.pass = false;
  }
  return out;
}

/// Max relative error of ForecastModel::backward() against central
/// differences of sum(upstream .* forward()).
inline double lstm_gradient_error(pvdfl::ForecastModel& model, const std::vector<pvdfl::FeatureWindow>& windows,
                                  const Eigen::MatrixXd& upstream, double h = 1e-6) {
  std::vector<const pvdfl::FeatureWindow*> batch;
  for (const auto& w : windows) batch.push_back(&w);
  pvdfl::ForwardTape tape;
  model.forward(batch, nullptr, &tape);
  const Eigen::VectorXd grad = model.backward(tape, upstream);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < model.params().size(); ++i) {
    const double saved = model.params()[i];
    model.params()[i] = saved + h;
    const double lp = model.forward(batch).cwiseProduct(upstream).sum();
    model.params()[i] = saved - h;
    const double lm = model.forward(batch).cwiseProduct(upstream).sum();
    model.params()[i] = saved;
    const double fd = (lp - lm) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
  }
  return worst;
}

inline std::vector<pvdfl::FeatureWindow> random_windows(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<pvdfl::FeatureWindow> out;
  for (int i = 0; i < n; ++i) {
    std::vector<double> pv(24), dni(24);
    for (int t = 0; t < 24; ++t) {
      pv[t] = 3.0 * U(rng);
      dni[t] = 800.0 * U(rng);
    }
    out.push_back(pvdfl::FeatureWindow::with_hours(pv, dni));
  }
  return out;
}

}  // namespace oracle
