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

#include "train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "datagen.hpp"
#include "error.hpp"
#include "metrics.hpp"

namespace pvdfl {

const char* to_string(Regime regime) noexcept {
  switch (regime) {
    case Regime::MSE: return "mse";
    case Regime::DFL: return "dfl";
    case Regime::DFL_WS: return "dfl-ws";
  }
  return "?";
}

Regime regime_from_string(const std::string& text) {
  if (text == "mse") return Regime::MSE;
  if (text == "dfl") return Regime::DFL;
  if (text == "dfl-ws" || text == "dfl_ws") return Regime::DFL_WS;
  fail(ErrorCode::ConfigInvalid, "unknown regime '" + text + "' (expected mse, dfl or dfl-ws)");
}

void TrainConfig::validate() const {
  hyper.validate();
  if (max_epochs <= 0 || patience <= 0) fail(ErrorCode::ConfigInvalid, "max_epochs and patience must be positive");
  if (patience >= max_epochs) fail(ErrorCode::ConfigInvalid, "patience must be below max_epochs");
  if (!(quad_reg_eps > 0.0)) fail(ErrorCode::ConfigInvalid, "quad_reg_eps must be > 0 for regret training");
  if (!(holdout_frac >= 0.0 && holdout_frac < 1.0)) fail(ErrorCode::ConfigInvalid, "holdout_frac must lie in [0,1)");
  if (!(grad_clip > 0.0)) fail(ErrorCode::ConfigInvalid, "grad_clip must be > 0");
  if (workers < 1) fail(ErrorCode::ConfigInvalid, "workers must be >= 1");
}

RegretInputs Sample::regret_inputs(const Day& pv_forecast) const {
  return RegretInputs{pv_forecast, pv_actual, load_forecast, price_import, price_export, battery};
}

namespace {

std::size_t offset_into(const HourlySeries& s, std::int64_t start, std::size_t hours, const char* what) {
  if (s.start_hour > start || s.end_hour() < start + static_cast<std::int64_t>(hours))
    fail(ErrorCode::LengthMismatch, std::string(what) + " does not cover the building's hours");
  return static_cast<std::size_t>(start - s.start_hour);
}

void copy_day(const HourlySeries& s, std::size_t offset, Day& out) {
  std::copy_n(s.values.begin() + static_cast<std::ptrdiff_t>(offset), kSeqLen, out.begin());
}

template <class F>
void parallel_for(std::size_t n, int workers, F&& body) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t k = 0; k < w; ++k)
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < n; i += w) body(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double clip_norm(Eigen::VectorXd& grad, double limit) {
  const double norm = grad.norm();
  if (norm > limit) grad *= limit / norm;
  return norm;
}

double mse_scaled(const std::vector<Day>& pred, const std::vector<Sample>& samples, double scale) {
  double se = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (int t = 0; t < kSeqLen; ++t) {
      const double e = (pred[i][t] - samples[i].pv_actual[t]) / scale;
      se += e * e;
    }
  return se / static_cast<double>(samples.size() * kSeqLen);
}

double srmse_of(const std::vector<Day>& pred, const std::vector<Sample>& samples) {
  std::vector<double> p, a;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    p.insert(p.end(), pred[i].begin(), pred[i].end());
    a.insert(a.end(), samples[i].pv_actual.begin(), samples[i].pv_actual.end());
  }
  // undefined without any PV; the history only logs it, so record 0
  if (std::none_of(a.begin(), a.end(), [](double v) { return v > 0.0; })) return 0.0;
  return s_rmse(p, a);
}

using Clock = std::chrono::steady_clock;

struct Selection {
  std::vector<Sample> train;
  std::vector<Sample> select;
};

Selection selection_sets(const std::vector<Sample>& train, const std::vector<Sample>& test, double holdout_frac) {
  if (holdout_frac <= 0.0) return {train, test};
  const auto keep = static_cast<std::size_t>(std::llround((1.0 - holdout_frac) * static_cast<double>(train.size())));
  return {std::vector<Sample>(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(keep)),
          std::vector<Sample>(train.begin() + static_cast<std::ptrdiff_t>(keep), train.end())};
}

// Shared epoch loop; `batch_step` returns the summed loss of one batch and
// fills `upstream` (kWh units), `evaluate` fills the record's test metrics.
template <class BatchStep, class Evaluate>
TrainResult run_epochs(ForecastModel model, const std::vector<Sample>& train, const TrainConfig& config,
                       BatchStep&& batch_step, Evaluate&& evaluate) {
  if (train.empty()) fail(ErrorCode::PreconditionViolated, "training split is empty");
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 0x5348));
  std::mt19937_64 dropout_rng(derive_seed(config.seed, 0x4452));
  Adam adam(model.params().size(), model.hyper().learning_rate);
  const auto start = Clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

  TrainResult best{model, {}};
  TrainHistory& hist = best.history;
  EpochRecord rec;
  evaluate(model, rec);
  rec.seconds = elapsed();
  hist.epochs.push_back(rec);
  double best_metric = rec.select_metric;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto B = static_cast<std::size_t>(model.hyper().batch_size);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < order.size(); first += B) {
      const std::size_t last = std::min(order.size(), first + B);
      std::vector<const Sample*> batch;
      std::vector<const FeatureWindow*> windows;
      for (std::size_t k = first; k < last; ++k) {
        batch.push_back(&train[order[k]]);
        windows.push_back(&train[order[k]].window);
      }
      ForwardTape tape;
      const Eigen::MatrixXd pred = model.forward(windows, &dropout_rng, &tape);
      Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(kSeqLen, static_cast<Eigen::Index>(batch.size()));
      const double loss = batch_step(model, batch, pred, upstream, hist);
      if (!std::isfinite(loss)) fail(ErrorCode::NonFiniteLoss, "loss became non-finite in epoch " + std::to_string(epoch));
      loss_sum += loss;
      Eigen::VectorXd grad = model.backward(tape, upstream);
      clip_norm(grad, config.grad_clip);
      if (!grad.allFinite())
        fail(ErrorCode::NonFiniteLoss, "gradient became non-finite in epoch " + std::to_string(epoch));
      adam.step(model.params(), grad);
    }
    rec = EpochRecord{};
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    evaluate(model, rec);
    rec.seconds = elapsed();
    hist.epochs.push_back(rec);
    if (rec.select_metric < best_metric) {
      best_metric = rec.select_metric;
      hist.best_epoch = epoch;
      best.model = model;
    }
    if (epoch - hist.best_epoch >= config.patience) break;
  }
  hist.seconds_total = elapsed();
  hist.seconds_to_best = hist.epochs[static_cast<std::size_t>(hist.best_epoch)].seconds;
  return best;
}

}  // namespace

std::vector<Sample> make_samples(const Building& building, const HourlySeries& dni_forecast,
                                 const HourlySeries& load_forecast, const HourlySeries& price_import,
                                 const HourlySeries& price_export) {
  building.validate();
  const std::int64_t start = building.pv_series.start_hour;
  const std::size_t hours = building.pv_series.size();
  const std::size_t o_dni = offset_into(dni_forecast, start, hours, "DNI forecast");
  const std::size_t o_load = offset_into(load_forecast, start, hours, "load forecast");
  const std::size_t o_im = offset_into(price_import, start, hours, "import price");
  const std::size_t o_ex = offset_into(price_export, start, hours, "export price");
  std::vector<Sample> out;
  const std::size_t days = hours / kHoursPerDay;
  for (std::size_t d = 1; d < days; ++d) {
    const std::size_t h = d * kHoursPerDay;
    Sample s;
    Day hist{}, dni{};
    copy_day(building.pv_series, h - kHoursPerDay, hist);
    copy_day(dni_forecast, o_dni + h, dni);
    s.window = FeatureWindow::with_hours(hist, dni);
    copy_day(building.pv_series, h, s.pv_actual);
    copy_day(load_forecast, o_load + h, s.load_forecast);
    copy_day(building.load_series, h, s.load_actual);
    copy_day(price_import, o_im + h, s.price_import);
    copy_day(price_export, o_ex + h, s.price_export);
    s.battery = building.battery;
    s.date = start / kHoursPerDay + static_cast<std::int64_t>(d);
    out.push_back(std::move(s));
  }
  return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_chronological(std::vector<Sample> samples,
                                                                        double train_frac) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) fail(ErrorCode::PreconditionViolated, "train_frac must lie in (0,1)");
  std::stable_sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) { return a.date < b.date; });
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(samples.size())));
  std::vector<Sample> test(std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_train)),
                           std::make_move_iterator(samples.end()));
  samples.resize(n_train);
  return {std::move(samples), std::move(test)};
}

void fit_normalization(ForecastModel& model, const std::vector<Sample>& train) {
  std::vector<FeatureWindow> windows;
  std::vector<double> pv;
  for (const auto& s : train) {
    windows.push_back(s.window);
    pv.insert(pv.end(), s.pv_actual.begin(), s.pv_actual.end());
  }
  model.normalization() = Normalization::fit(windows, pv);
}

std::vector<Day> predict_all(const ForecastModel& model, const std::vector<Sample>& samples) {
  std::vector<Day> out(samples.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t first = 0; first < samples.size(); first += kChunk) {
    const std::size_t last = std::min(samples.size(), first + kChunk);
    std::vector<const FeatureWindow*> windows;
    for (std::size_t i = first; i < last; ++i) windows.push_back(&samples[i].window);
    const Eigen::MatrixXd pred = model.forward(windows);
    for (std::size_t i = first; i < last; ++i)
      for (int t = 0; t < kSeqLen; ++t) out[i][t] = pred(t, static_cast<Eigen::Index>(i - first));
  }
  return out;
}

void cache_perfect_costs(std::vector<Sample>& samples) {
  for (auto& s : samples)
    if (!s.perfect_cost) s.perfect_cost = perfect_cost(s.regret_inputs(s.pv_actual));
}

double mean_regret(const std::vector<Day>& forecasts, const std::vector<Sample>& samples, double quad_reg_eps) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    sum += regret_only(samples[i].regret_inputs(forecasts[i]), quad_reg_eps, samples[i].perfect_cost);
  return sum / static_cast<double>(samples.size());
}

TrainResult train_mse(ForecastModel model, const std::vector<Sample>& train, const std::vector<Sample>& test,
                      const TrainConfig& config) {
  config.validate();
  if (config.regime != Regime::MSE) fail(ErrorCode::PreconditionViolated, "train_mse needs regime mse");
  const Selection sets = selection_sets(train, test, config.holdout_frac);
  const double scale = model.normalization().pv_scale;

  auto step = [&](const ForecastModel&, const std::vector<const Sample*>& batch, const Eigen::MatrixXd& pred,
                  Eigen::MatrixXd& upstream, TrainHistory&) {
    const double denom = scale * scale * static_cast<double>(batch.size()) * kSeqLen;
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b)
      for (int t = 0; t < kSeqLen; ++t) {
        const double e = pred(t, static_cast<Eigen::Index>(b)) - batch[b]->pv_actual[t];
        loss += e * e / (scale * scale * kSeqLen);
        upstream(t, static_cast<Eigen::Index>(b)) = 2.0 * e / denom;
      }
    return loss;
  };
  auto evaluate = [&](const ForecastModel& m, EpochRecord& rec) {
    const std::vector<Day> sel = predict_all(m, sets.select);
    rec.select_metric = mse_scaled(sel, sets.select, scale);
    if (config.holdout_frac > 0.0) {
      const std::vector<Day> te = predict_all(m, test);
      rec.test_mse = mse_scaled(te, test, scale);
      rec.test_srmse = test.empty() ? 0.0 : srmse_of(te, test);
    } else {
      rec.test_mse = rec.select_metric;
      rec.test_srmse = test.empty() ? 0.0 : srmse_of(sel, test);
    }
  };
  return run_epochs(std::move(model), sets.train, config, step, evaluate);
}

TrainResult train_dfl(ForecastModel model, const std::vector<Sample>& train, const std::vector<Sample>& test,
                      const TrainConfig& config) {
  config.validate();
  if (config.regime == Regime::MSE) fail(ErrorCode::PreconditionViolated, "train_dfl needs regime dfl or dfl-ws");
  for (const auto* set : {&train, &test})
    for (const auto& s : *set)
      if (!s.perfect_cost) fail(ErrorCode::PreconditionViolated, "samples lack cached perfect costs");
  const Selection sets = selection_sets(train, test, config.holdout_frac);
  const double scale = model.normalization().pv_scale;
  const double eps = config.quad_reg_eps;

  auto step = [&](const ForecastModel&, const std::vector<const Sample*>& batch, const Eigen::MatrixXd& pred,
                  Eigen::MatrixXd& upstream, TrainHistory& hist) {
    std::vector<double> regret(batch.size(), 0.0);
    std::vector<char> skipped(batch.size(), 0);
    parallel_for(batch.size(), config.workers, [&](std::size_t b) {
      Day fc{};
      for (int t = 0; t < kSeqLen; ++t) fc[t] = pred(t, static_cast<Eigen::Index>(b));
      try {
        const RegretResult r = regret_and_gradient(batch[b]->regret_inputs(fc), eps, batch[b]->perfect_cost);
        regret[b] = r.regret;
        for (int t = 0; t < kSeqLen; ++t)
          upstream(t, static_cast<Eigen::Index>(b)) = r.grad[t] / static_cast<double>(batch.size());
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingularKkt) throw;
        skipped[b] = 1;
      }
    });
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      loss += regret[b];
      hist.skipped_singular += skipped[b];
    }
    return loss;
  };
  auto evaluate = [&](const ForecastModel& m, EpochRecord& rec) {
    const std::vector<Day> sel = predict_all(m, sets.select);
    rec.select_metric = mean_regret(sel, sets.select, eps);
    const std::vector<Day> te = config.holdout_frac > 0.0 ? predict_all(m, test) : sel;
    rec.test_regret = config.holdout_frac > 0.0 ? mean_regret(te, test, eps) : rec.select_metric;
    rec.test_mse = test.empty() ? 0.0 : mse_scaled(te, test, scale);
    rec.test_srmse = test.empty() ? 0.0 : srmse_of(te, test);
  };
  return run_epochs(std::move(model), sets.train, config, step, evaluate);
}

}  // namespace pvdfl
