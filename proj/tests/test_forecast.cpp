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
#include "forecast.hpp"
#include "oracles.hpp"

using namespace pvdfl;
using testing::code_of;

namespace {

LstmHyper tiny(double dropout = 0.0) {
  LstmHyper h;
  h.layers = 2;
  h.hidden_size = 5;
  h.dropout_frac = dropout;
  return h;
}

ForecastModel fitted(const LstmHyper& h, const std::vector<FeatureWindow>& ws, std::uint64_t seed = 5) {
  ForecastModel m(h, seed);
  m.normalization() = Normalization::fit(ws, std::vector<double>{3.0, 1.0});
  return m;
}

std::vector<const FeatureWindow*> ptrs(const std::vector<FeatureWindow>& ws) {
  std::vector<const FeatureWindow*> out;
  for (const auto& w : ws) out.push_back(&w);
  return out;
}

}  // namespace

TEST_CASE("hyperparameters are validated") {
  LstmHyper h;
  h.dropout_frac = 1.0;
  CHECK(code_of([&] { h.validate(); }) == ErrorCode::ConfigInvalid);
  h = LstmHyper{};
  h.hidden_size = 0;
  CHECK(code_of([&] { h.validate(); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("backward matches central differences") {
  std::mt19937_64 rng(3);
  const auto ws = oracle::random_windows(rng, 3);
  LstmHyper h = tiny();
  h.hidden_size = 4;
  h.layers = 3;
  ForecastModel m = fitted(h, ws);
  m.params().tail(24).array() += 1.0;
  Eigen::MatrixXd up(24, 3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = U(rng);
  CHECK(oracle::lstm_gradient_error(m, ws, up) <= 1e-4);
}

TEST_CASE("zero upstream gives zero gradient") {
  std::mt19937_64 rng(4);
  const auto ws = oracle::random_windows(rng, 2);
  const ForecastModel m = fitted(tiny(), ws);
  ForwardTape tape;
  m.forward(ptrs(ws), nullptr, &tape);
  CHECK(m.backward(tape, Eigen::MatrixXd::Zero(24, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zeroed head outputs the clamped bias") {
  std::mt19937_64 rng(5);
  const auto ws = oracle::random_windows(rng, 2);
  ForecastModel m = fitted(tiny(), ws);
  m.zero_head();
  for (const auto& v : m.predict(ws[0])) CHECK(v == 0.0);
}

TEST_CASE("inference is deterministic, dropout is seeded") {
  std::mt19937_64 rng(6);
  const auto ws = oracle::random_windows(rng, 4);
  const ForecastModel m = fitted(tiny(0.5), ws);
  CHECK(m.forward(ptrs(ws)) == m.forward(ptrs(ws)));
  for (const auto& v : m.predict(ws[1])) CHECK(v >= 0.0);

  std::mt19937_64 d1(9), d2(9);
  ForwardTape t1, t2;
  const Eigen::MatrixXd o1 = m.forward(ptrs(ws), &d1, &t1);
  const Eigen::MatrixXd o2 = m.forward(ptrs(ws), &d2, &t2);
  CHECK(o1 == o2);
  const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(24, 4);
  CHECK(m.backward(t1, up) == m.backward(t2, up));
}

TEST_CASE("inverted dropout keeps the expected first-layer input") {
  // mask entries are 0 or 1 / (1 - p)
  std::mt19937_64 rng(7);
  const auto ws = oracle::random_windows(rng, 8);
  const ForecastModel m = fitted(tiny(0.4), ws);
  std::mt19937_64 d(1);
  double sum = 0.0;
  long n = 0;
  for (int rep = 0; rep < 50; ++rep) {
    ForwardTape tape;
    m.forward(ptrs(ws), &d, &tape);
    for (const auto& layer : tape.drop)
      for (const auto& mask : layer)
        for (Eigen::Index i = 0; i < mask.size(); ++i) {
          const double v = mask.data()[i];
          CHECK((v == 0.0 || std::abs(v - 1.0 / 0.6) < 1e-12));
          sum += v;
          ++n;
        }
  }
  REQUIRE(n > 0);
  CHECK(sum / static_cast<double>(n) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("checkpoint round-trip keeps predictions bit-identical") {
  testing::TempDir dir("ckpt");
  std::mt19937_64 rng(8);
  const auto ws = oracle::random_windows(rng, 3);
  const ForecastModel m = fitted(tiny(0.3), ws, 42);
  const auto path = dir.path / "m.ckpt";
  m.save(path);
  const ForecastModel back = ForecastModel::load(path);
  CHECK(back.hyper() == m.hyper());
  CHECK(back.normalization() == m.normalization());
  CHECK(back.rng_seed() == m.rng_seed());
  CHECK(back.params() == m.params());
  CHECK(back.forward(ptrs(ws)) == m.forward(ptrs(ws)));
}

TEST_CASE("bad checkpoints are rejected") {
  testing::TempDir dir("badckpt");
  CHECK(code_of([&] { ForecastModel::load(dir.path / "missing.ckpt"); }) == ErrorCode::MissingCheckpoint);
  {
    std::ofstream(dir.path / "junk.ckpt") << "not a checkpoint";
  }
  const ErrorCode c = code_of([&] { ForecastModel::load(dir.path / "junk.ckpt"); });
  CHECK((c == ErrorCode::ParseError || c == ErrorCode::SchemaError));
}

TEST_CASE("normalization uses the given windows only") {
  std::vector<FeatureWindow> ws;
  std::vector<double> pv(24, 2.0), dni(24, 100.0);
  ws.push_back(FeatureWindow::with_hours(pv, dni));
  pv.assign(24, 4.0);
  dni.assign(24, 300.0);
  ws.push_back(FeatureWindow::with_hours(pv, dni));
  const Normalization n = Normalization::fit(ws, std::vector<double>{1.0, 5.0});
  CHECK(n.mean[0] == doctest::Approx(3.0));
  CHECK(n.std[0] == doctest::Approx(1.0));
  CHECK(n.mean[1] == doctest::Approx(200.0));
  CHECK(n.pv_scale == 5.0);
  CHECK(code_of([] { Normalization::fit({}, std::vector<double>{0.0}); }) != static_cast<ErrorCode>(0));
}

TEST_CASE("naive forecast is the identity") {
  std::vector<double> v(24);
  for (int t = 0; t < 24; ++t) v[t] = 0.1 * t;
  const auto out = naive_forecast(v);
  CHECK(std::equal(out.begin(), out.end(), v.begin()));
  const auto zero = naive_forecast(std::vector<double>(24, 0.0));
  for (double x : zero) CHECK(x == 0.0);
}

TEST_CASE("Adam takes a learning-rate sized first step") {
  Adam opt(2, 0.1);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd g(2);
  g << 3.0, -0.5;
  opt.step(p, g);
  CHECK(p[0] == doctest::Approx(-0.1));
  CHECK(p[1] == doctest::Approx(0.1));
  CHECK(opt.steps() == 1);
}
