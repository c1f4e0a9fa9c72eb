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
#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "domain.hpp"

namespace pvdfl {

inline constexpr int kSeqLen = 24;
inline constexpr int kFeatureCount = 4;

struct LstmHyper {
  int layers = 3;
  int hidden_size = 200;
  double dropout_frac = 0.5;
  double learning_rate = 1e-4;
  int batch_size = 32;

  void validate() const;  // ConfigInvalid
  bool operator==(const LstmHyper&) const = default;
};

/// Model inputs for one forecast day, one entry per hour.
struct FeatureWindow {
  std::array<double, kSeqLen> pv_hist{};
  std::array<double, kSeqLen> dni_fcst{};
  std::array<double, kSeqLen> hour_cos{};
  std::array<double, kSeqLen> hour_sin{};

  void validate() const;  // PreconditionViolated
  /// Hour-of-day encoding for hours 0..23.
  static FeatureWindow with_hours(std::span<const double> pv_hist, std::span<const double> dni_fcst);
};

/// z-score statistics of the four input features and the PV target scale.
struct Normalization {
  std::array<double, kFeatureCount> mean{0.0, 0.0, 0.0, 0.0};
  std::array<double, kFeatureCount> std{1.0, 1.0, 1.0, 1.0};
  double pv_scale = 1.0;

  /// Statistics from the training windows only; pv_scale = max training PV.
  static Normalization fit(std::span<const FeatureWindow> windows, std::span<const double> train_pv);
  void validate() const;  // ZeroVariance / ZeroMaxPv
  bool operator==(const Normalization&) const = default;
};

/// Activations recorded by a forward pass, consumed by backward().
struct ForwardTape {
  int batch = 0;
  // per layer, per step
  std::vector<std::vector<Eigen::MatrixXd>> concat;  // [x_t; h_{t-1}]
  std::vector<std::vector<Eigen::MatrixXd>> gates;   // activated i, f, g, o
  std::vector<std::vector<Eigen::MatrixXd>> cell;    // c_t
  std::vector<std::vector<Eigen::MatrixXd>> drop;    // mask on the layer input (layers >= 1), scaled
  Eigen::MatrixXd head_in;                           // final hidden state of the top layer
  Eigen::MatrixXd raw_out;                           // head output before the clamp
};

class ForecastModel {
 public:
  ForecastModel() = default;
  /// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias +1.
  ForecastModel(const LstmHyper& hyper, std::uint64_t rng_seed);

  const LstmHyper& hyper() const noexcept { return hyper_; }
  std::uint64_t rng_seed() const noexcept { return rng_seed_; }
  Normalization& normalization() noexcept { return norm_; }
  const Normalization& normalization() const noexcept { return norm_; }
  Eigen::VectorXd& params() noexcept { return params_; }
  const Eigen::VectorXd& params() const noexcept { return params_; }

  /// Forecasts in kWh, one column per window. Dropout is active when
  /// `dropout_rng` is given (training mode); `tape` records activations.
  Eigen::MatrixXd forward(std::span<const FeatureWindow* const> batch, std::mt19937_64* dropout_rng = nullptr,
                          ForwardTape* tape = nullptr) const;

  /// Parameter gradient for upstream d loss / d forecast (kWh units,
  /// kSeqLen x batch).
  Eigen::VectorXd backward(const ForwardTape& tape, const Eigen::MatrixXd& upstream) const;

  std::array<double, kSeqLen> predict(const FeatureWindow& window) const;

  void zero_head();

  void save(const std::filesystem::path& path) const;
  static ForecastModel load(const std::filesystem::path& path);

 private:
  struct Offsets {
    std::vector<Eigen::Index> w, b, in;
    Eigen::Index head_w = 0, head_b = 0, total = 0;
  };
  static Offsets layout(const LstmHyper& h);

  LstmHyper hyper_;
  Normalization norm_;
  std::uint64_t rng_seed_ = 0;
  Offsets off_;
  Eigen::VectorXd params_;
};

/// Tomorrow equals today.
std::array<double, kSeqLen> naive_forecast(std::span<const double> pv_hist);

/// Adam with bias correction, no weight decay.
class Adam {
 public:
  Adam(Eigen::Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  long steps() const noexcept { return t_; }

 private:
  Eigen::VectorXd m_, v_;
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
};

}  // namespace pvdfl
