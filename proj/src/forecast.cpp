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

#include "forecast.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "error.hpp"
#include "json.hpp"

namespace pvdfl {

void LstmHyper::validate() const {
  if (layers <= 0 || hidden_size <= 0 || batch_size <= 0)
    fail(ErrorCode::ConfigInvalid, "LSTM layers, hidden_size and batch_size must be positive");
  if (!(dropout_frac >= 0.0 && dropout_frac < 1.0)) fail(ErrorCode::ConfigInvalid, "dropout_frac must lie in [0,1)");
  if (!(learning_rate > 0.0)) fail(ErrorCode::ConfigInvalid, "learning_rate must be positive");
}

void FeatureWindow::validate() const {
  for (int t = 0; t < kSeqLen; ++t) {
    if (!std::isfinite(pv_hist[t]) || !std::isfinite(dni_fcst[t]) || !std::isfinite(hour_cos[t]) ||
        !std::isfinite(hour_sin[t]))
      fail(ErrorCode::NonFinite, "feature window holds a non-finite value at step " + std::to_string(t));
    if (std::abs(hour_cos[t] * hour_cos[t] + hour_sin[t] * hour_sin[t] - 1.0) > 1e-9)
      fail(ErrorCode::PreconditionViolated, "hour encoding is not on the unit circle at step " + std::to_string(t));
  }
}

FeatureWindow FeatureWindow::with_hours(std::span<const double> pv_hist, std::span<const double> dni_fcst) {
  if (pv_hist.size() != kSeqLen || dni_fcst.size() != kSeqLen)
    fail(ErrorCode::LengthMismatch, "feature windows hold 24 hours");
  FeatureWindow w;
  for (int t = 0; t < kSeqLen; ++t) {
    w.pv_hist[t] = pv_hist[t];
    w.dni_fcst[t] = dni_fcst[t];
    const double angle = 2.0 * std::numbers::pi * t / 24.0;
    w.hour_cos[t] = std::cos(angle);
    w.hour_sin[t] = std::sin(angle);
  }
  return w;
}

namespace {

const std::array<double, kSeqLen>& feature(const FeatureWindow& w, int f) {
  switch (f) {
    case 0: return w.pv_hist;
    case 1: return w.dni_fcst;
    case 2: return w.hour_cos;
    default: return w.hour_sin;
  }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// 53-bit uniform in [0,1); independent of the standard library's distributions.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

Normalization Normalization::fit(std::span<const FeatureWindow> windows, std::span<const double> train_pv) {
  Normalization n;
  if (windows.empty()) fail(ErrorCode::PreconditionViolated, "normalization needs at least one window");
  for (int f = 0; f < kFeatureCount; ++f) {
    double sum = 0.0, sq = 0.0;
    for (const auto& w : windows)
      for (double v : feature(w, f)) sum += v;
    const double count = static_cast<double>(windows.size()) * kSeqLen;
    n.mean[f] = sum / count;
    for (const auto& w : windows)
      for (double v : feature(w, f)) sq += (v - n.mean[f]) * (v - n.mean[f]);
    n.std[f] = std::sqrt(sq / count);
  }
  n.pv_scale = 0.0;
  for (double v : train_pv) n.pv_scale = std::max(n.pv_scale, v);
  n.validate();
  return n;
}

void Normalization::validate() const {
  for (double s : std)
    if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorCode::ZeroVariance, "feature standard deviation must be > 0");
  if (!(pv_scale > 0.0) || !std::isfinite(pv_scale)) fail(ErrorCode::ZeroMaxPv, "training PV maximum must be > 0");
}

ForecastModel::Offsets ForecastModel::layout(const LstmHyper& h) {
  Offsets o;
  const Eigen::Index H = h.hidden_size;
  Eigen::Index at = 0;
  for (int l = 0; l < h.layers; ++l) {
    const Eigen::Index in = l == 0 ? kFeatureCount : H;
    o.in.push_back(in);
    o.w.push_back(at);
    at += 4 * H * (in + H);
    o.b.push_back(at);
    at += 4 * H;
  }
  o.head_w = at;
  at += kSeqLen * H;
  o.head_b = at;
  at += kSeqLen;
  o.total = at;
  return o;
}

ForecastModel::ForecastModel(const LstmHyper& hyper, std::uint64_t rng_seed)
    : hyper_(hyper), rng_seed_(rng_seed), off_(layout(hyper)) {
  hyper_.validate();
  params_.resize(off_.total);
  std::mt19937_64 rng(rng_seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hyper_.hidden_size));
  for (Eigen::Index i = 0; i < off_.total; ++i) params_[i] = bound * (2.0 * unit_uniform(rng) - 1.0);
  const Eigen::Index H = hyper_.hidden_size;
  for (int l = 0; l < hyper_.layers; ++l) params_.segment(off_.b[l] + H, H).setOnes();
}

void ForecastModel::zero_head() { params_.segment(off_.head_w, off_.total - off_.head_w).setZero(); }

Eigen::MatrixXd ForecastModel::forward(std::span<const FeatureWindow* const> batch, std::mt19937_64* dropout_rng,
                                       ForwardTape* tape) const {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index H = hyper_.hidden_size;
  const int L = hyper_.layers;
  const bool dropout = dropout_rng && hyper_.dropout_frac > 0.0;
  const double keep = 1.0 - hyper_.dropout_frac;

  // Normalized inputs of layer 0, then outputs of each layer in turn.
  std::vector<Eigen::MatrixXd> seq(kSeqLen, Eigen::MatrixXd(kFeatureCount, B));
  for (int t = 0; t < kSeqLen; ++t)
    for (Eigen::Index b = 0; b < B; ++b)
      for (int f = 0; f < kFeatureCount; ++f)
        seq[t](f, b) = (feature(*batch[b], f)[t] - norm_.mean[f]) / norm_.std[f];

  if (tape) {
    tape->batch = static_cast<int>(B);
    tape->concat.assign(L, std::vector<Eigen::MatrixXd>(kSeqLen));
    tape->gates.assign(L, std::vector<Eigen::MatrixXd>(kSeqLen));
    tape->cell.assign(L, std::vector<Eigen::MatrixXd>(kSeqLen));
    tape->drop.assign(L, std::vector<Eigen::MatrixXd>());
  }

  Eigen::MatrixXd z, a, h, c;
  for (int l = 0; l < L; ++l) {
    const Eigen::Index in = off_.in[l];
    const Eigen::Map<const Eigen::MatrixXd> W(params_.data() + off_.w[l], 4 * H, in + H);
    const Eigen::Map<const Eigen::VectorXd> bias(params_.data() + off_.b[l], 4 * H);
    h.setZero(H, B);
    c.setZero(H, B);
    if (l > 0 && dropout) {
      // Inverted dropout on the outputs of the layer below, fresh per step.
      std::vector<Eigen::MatrixXd> masks(kSeqLen, Eigen::MatrixXd(in, B));
      for (int t = 0; t < kSeqLen; ++t) {
        for (Eigen::Index j = 0; j < masks[t].size(); ++j)
          masks[t].data()[j] = unit_uniform(*dropout_rng) < keep ? 1.0 / keep : 0.0;
        seq[t] = seq[t].cwiseProduct(masks[t]);
      }
      if (tape) tape->drop[l] = std::move(masks);
    }
    for (int t = 0; t < kSeqLen; ++t) {
      z.resize(in + H, B);
      z.topRows(in) = seq[t];
      z.bottomRows(H) = h;
      a.noalias() = W * z;
      a.colwise() += bias;
      for (Eigen::Index b = 0; b < B; ++b)
        for (Eigen::Index k = 0; k < H; ++k) {
          a(k, b) = sigmoid(a(k, b));
          a(H + k, b) = sigmoid(a(H + k, b));
          a(2 * H + k, b) = std::tanh(a(2 * H + k, b));
          a(3 * H + k, b) = sigmoid(a(3 * H + k, b));
          c(k, b) = a(H + k, b) * c(k, b) + a(k, b) * a(2 * H + k, b);
          h(k, b) = a(3 * H + k, b) * std::tanh(c(k, b));
        }
      seq[t] = h;
      if (tape) {
        tape->concat[l][t] = z;
        tape->gates[l][t] = a;
        tape->cell[l][t] = c;
      }
    }
  }

  const Eigen::Map<const Eigen::MatrixXd> Wo(params_.data() + off_.head_w, kSeqLen, H);
  const Eigen::Map<const Eigen::VectorXd> bo(params_.data() + off_.head_b, kSeqLen);
  Eigen::MatrixXd raw = Wo * seq[kSeqLen - 1];
  raw.colwise() += bo;
  if (tape) {
    tape->head_in = seq[kSeqLen - 1];
    tape->raw_out = raw;
  }
  return raw.cwiseMax(0.0) * norm_.pv_scale;
}

Eigen::VectorXd ForecastModel::backward(const ForwardTape& tape, const Eigen::MatrixXd& upstream) const {
  const Eigen::Index B = tape.batch;
  const Eigen::Index H = hyper_.hidden_size;
  const int L = hyper_.layers;
  if (upstream.rows() != kSeqLen || upstream.cols() != B)
    fail(ErrorCode::LengthMismatch, "upstream gradient shape differs from the recorded batch");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(off_.total);

  const Eigen::MatrixXd draw = (tape.raw_out.array() > 0.0).select(upstream * norm_.pv_scale, 0.0);
  Eigen::Map<Eigen::MatrixXd>(grad.data() + off_.head_w, kSeqLen, H).noalias() = draw * tape.head_in.transpose();
  Eigen::Map<Eigen::VectorXd>(grad.data() + off_.head_b, kSeqLen) = draw.rowwise().sum();
  const Eigen::Map<const Eigen::MatrixXd> Wo(params_.data() + off_.head_w, kSeqLen, H);

  // d loss / d output of the current layer at each step.
  std::vector<Eigen::MatrixXd> d_out(kSeqLen, Eigen::MatrixXd::Zero(H, B));
  d_out[kSeqLen - 1] = Wo.transpose() * draw;

  Eigen::MatrixXd dh_next, dc_next, da(4 * H, B), dz;
  for (int l = L - 1; l >= 0; --l) {
    const Eigen::Index in = off_.in[l];
    const Eigen::Map<const Eigen::MatrixXd> W(params_.data() + off_.w[l], 4 * H, in + H);
    Eigen::Map<Eigen::MatrixXd> dW(grad.data() + off_.w[l], 4 * H, in + H);
    Eigen::Map<Eigen::VectorXd> db(grad.data() + off_.b[l], 4 * H);
    std::vector<Eigen::MatrixXd> d_in(l > 0 ? kSeqLen : 0);
    dh_next.setZero(H, B);
    dc_next.setZero(H, B);
    for (int t = kSeqLen - 1; t >= 0; --t) {
      const Eigen::MatrixXd& g = tape.gates[l][t];
      const Eigen::MatrixXd& c = tape.cell[l][t];
      for (Eigen::Index b = 0; b < B; ++b)
        for (Eigen::Index k = 0; k < H; ++k) {
          const double i = g(k, b), f = g(H + k, b), gg = g(2 * H + k, b), o = g(3 * H + k, b);
          const double tc = std::tanh(c(k, b));
          const double c_prev = t > 0 ? tape.cell[l][t - 1](k, b) : 0.0;
          const double dh = d_out[t](k, b) + dh_next(k, b);
          const double dc = dc_next(k, b) + dh * o * (1.0 - tc * tc);
          da(k, b) = dc * gg * i * (1.0 - i);
          da(H + k, b) = dc * c_prev * f * (1.0 - f);
          da(2 * H + k, b) = dc * i * (1.0 - gg * gg);
          da(3 * H + k, b) = dh * tc * o * (1.0 - o);
          dc_next(k, b) = dc * f;
        }
      dW.noalias() += da * tape.concat[l][t].transpose();
      db += da.rowwise().sum();
      dz.noalias() = W.transpose() * da;
      dh_next = dz.bottomRows(H);
      if (l > 0) {
        d_in[t] = dz.topRows(in);
        if (!tape.drop[l].empty()) d_in[t] = d_in[t].cwiseProduct(tape.drop[l][t]);
      }
    }
    if (l > 0) d_out = std::move(d_in);
  }
  return grad;
}

std::array<double, kSeqLen> ForecastModel::predict(const FeatureWindow& window) const {
  const FeatureWindow* one[] = {&window};
  const Eigen::MatrixXd out = forward(one);
  std::array<double, kSeqLen> r{};
  for (int t = 0; t < kSeqLen; ++t) r[t] = out(t, 0);
  return r;
}

namespace {

constexpr char kMagic[8] = {'P', 'V', 'D', 'F', 'L', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void ForecastModel::save(const std::filesystem::path& path) const {
  static_assert(std::endian::native == std::endian::little, "checkpoints are little-endian");
  nlohmann::json header = {
      {"layers", hyper_.layers},
      {"hidden_size", hyper_.hidden_size},
      {"dropout_frac", hyper_.dropout_frac},
      {"learning_rate", hyper_.learning_rate},
      {"batch_size", hyper_.batch_size},
      {"feature_mean", norm_.mean},
      {"feature_std", norm_.std},
      {"pv_scale", norm_.pv_scale},
      {"rng_seed", rng_seed_},
      {"param_count", params_.size()},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write checkpoint " + path.string());
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof kCheckpointVersion);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(params_.data()), static_cast<std::streamsize>(params_.size() * sizeof(double)));
  if (!out) fail(ErrorCode::IoError, "short write on checkpoint " + path.string());
}

ForecastModel ForecastModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::MissingCheckpoint, "checkpoint not found: " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0 || version != kCheckpointVersion || len > (1u << 20))
    fail(ErrorCode::ParseError, path.string() + ": not a version-1 checkpoint");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": bad checkpoint header: " + e.what());
  }
  ForecastModel m;
  try {
    m.hyper_.layers = header.at("layers").get<int>();
    m.hyper_.hidden_size = header.at("hidden_size").get<int>();
    m.hyper_.dropout_frac = header.at("dropout_frac").get<double>();
    m.hyper_.learning_rate = header.at("learning_rate").get<double>();
    m.hyper_.batch_size = header.at("batch_size").get<int>();
    m.norm_.mean = header.at("feature_mean").get<std::array<double, kFeatureCount>>();
    m.norm_.std = header.at("feature_std").get<std::array<double, kFeatureCount>>();
    m.norm_.pv_scale = header.at("pv_scale").get<double>();
    m.rng_seed_ = header.at("rng_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SchemaError, path.string() + ": checkpoint header: " + e.what());
  }
  m.hyper_.validate();
  m.off_ = layout(m.hyper_);
  if (header.value("param_count", Eigen::Index{-1}) != m.off_.total)
    fail(ErrorCode::SchemaError, path.string() + ": parameter count does not match the architecture");
  m.params_.resize(m.off_.total);
  in.read(reinterpret_cast<char*>(m.params_.data()), static_cast<std::streamsize>(m.off_.total * sizeof(double)));
  if (!in) fail(ErrorCode::ParseError, path.string() + ": truncated parameters");
  if (!m.params_.allFinite()) fail(ErrorCode::NonFinite, path.string() + ": non-finite parameters");
  return m;
}

std::array<double, kSeqLen> naive_forecast(std::span<const double> pv_hist) {
  if (pv_hist.size() != kSeqLen) fail(ErrorCode::LengthMismatch, "naive forecast needs 24 hours of history");
  std::array<double, kSeqLen> out{};
  std::copy(pv_hist.begin(), pv_hist.end(), out.begin());
  return out;
}

Adam::Adam(Eigen::Index size, double learning_rate, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)), lr_(learning_rate), b1_(beta1), b2_(beta2),
      eps_(eps) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace pvdfl
