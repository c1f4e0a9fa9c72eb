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

#include "config_json.hpp"

#include <set>

#include "error.hpp"

namespace pvdfl {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) fail(ErrorCode::ConfigInvalid, std::string(what) + " must be a JSON object");
  std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) fail(ErrorCode::ConfigInvalid, "unknown key '" + k + "' in " + what);
}

template <class T>
void take(const json& j, const char* key, T& field) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigInvalid, std::string("bad value for '") + key + "': " + e.what());
  }
}

}  // namespace

json to_json(const LstmHyper& h) {
  return {{"layers", h.layers},
          {"hidden_size", h.hidden_size},
          {"dropout_frac", h.dropout_frac},
          {"learning_rate", h.learning_rate},
          {"batch_size", h.batch_size}};
}

json to_json(const NoiseSpec& s) {
  return {{"alpha", s.alpha},
          {"beta", s.beta},
          {"shift_prob", s.shift_prob},
          {"shift_max", s.shift_max},
          {"smooth_sigma", s.smooth_sigma}};
}

json to_json(const TariffConfig& t) {
  return {{"base_level", t.base_level},
          {"daily_amplitude", t.daily_amplitude},
          {"weekly_amplitude", t.weekly_amplitude},
          {"trend_per_year", t.trend_per_year},
          {"noise_std", t.noise_std},
          {"noise_ar", t.noise_ar},
          {"offtake_tax", t.offtake_tax},
          {"export_discount_frac", t.export_discount_frac}};
}

json to_json(const DatasetConfig& c) {
  return {{"buildings", c.buildings},
          {"years", c.years},
          {"seed", c.seed},
          {"load_noise_level", c.load_noise_level},
          {"dni_noise", to_json(c.dni_noise)},
          {"load_noise", to_json(c.load_noise)},
          {"tariff", to_json(c.tariff)},
          {"start_hour", c.start_hour}};
}

json to_json(const ExperimentConfig& c) {
  return {{"hyper", to_json(c.hyper)},   {"max_epochs", c.max_epochs},
          {"patience", c.patience},      {"quad_reg_eps", c.quad_reg_eps},
          {"holdout_frac", c.holdout_frac}, {"train_frac", c.train_frac},
          {"seed", c.seed},              {"jobs", c.jobs},
          {"workers", c.workers}};
}

json to_json(const TrainHistory& h) {
  json epochs = json::array();
  for (const auto& e : h.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"select_metric", e.select_metric},
                      {"test_mse", e.test_mse},
                      {"test_regret", e.test_regret},
                      {"test_srmse", e.test_srmse},
                      {"seconds", e.seconds}});
  return {{"best_epoch", h.best_epoch},
          {"seconds_to_best", h.seconds_to_best},
          {"seconds_total", h.seconds_total},
          {"skipped_singular", h.skipped_singular},
          {"epochs", epochs}};
}

void merge(LstmHyper& h, const json& j) {
  reject_unknown(j, {"layers", "hidden_size", "dropout_frac", "learning_rate", "batch_size"}, "hyper");
  take(j, "layers", h.layers);
  take(j, "hidden_size", h.hidden_size);
  take(j, "dropout_frac", h.dropout_frac);
  take(j, "learning_rate", h.learning_rate);
  take(j, "batch_size", h.batch_size);
}

void merge(NoiseSpec& s, const json& j) {
  reject_unknown(j, {"alpha", "beta", "shift_prob", "shift_max", "smooth_sigma"}, "noise spec");
  take(j, "alpha", s.alpha);
  take(j, "beta", s.beta);
  take(j, "shift_prob", s.shift_prob);
  take(j, "shift_max", s.shift_max);
  take(j, "smooth_sigma", s.smooth_sigma);
}

void merge(TariffConfig& t, const json& j) {
  reject_unknown(j,
                 {"base_level", "daily_amplitude", "weekly_amplitude", "trend_per_year", "noise_std", "noise_ar",
                  "offtake_tax", "export_discount_frac"},
                 "tariff");
  take(j, "base_level", t.base_level);
  take(j, "daily_amplitude", t.daily_amplitude);
  take(j, "weekly_amplitude", t.weekly_amplitude);
  take(j, "trend_per_year", t.trend_per_year);
  take(j, "noise_std", t.noise_std);
  take(j, "noise_ar", t.noise_ar);
  take(j, "offtake_tax", t.offtake_tax);
  take(j, "export_discount_frac", t.export_discount_frac);
}

void merge(DatasetConfig& c, const json& j) {
  reject_unknown(j,
                 {"buildings", "years", "seed", "load_noise_level", "dni_noise", "load_noise", "tariff", "start_hour"},
                 "dataset config");
  take(j, "buildings", c.buildings);
  take(j, "years", c.years);
  take(j, "seed", c.seed);
  take(j, "load_noise_level", c.load_noise_level);
  take(j, "start_hour", c.start_hour);
  if (j.contains("dni_noise")) merge(c.dni_noise, j["dni_noise"]);
  if (j.contains("load_noise")) merge(c.load_noise, j["load_noise"]);
  if (j.contains("tariff")) merge(c.tariff, j["tariff"]);
}

void merge(ExperimentConfig& c, const json& j) {
  reject_unknown(j,
                 {"profile", "hyper", "max_epochs", "patience", "quad_reg_eps", "holdout_frac", "train_frac", "seed",
                  "jobs", "workers"},
                 "experiment config");
  if (j.contains("profile")) {
    std::string name;
    take(j, "profile", name);
    const int jobs = c.jobs, workers = c.workers;
    const std::uint64_t seed = c.seed;
    c = ExperimentConfig::profile(name);
    c.jobs = jobs;
    c.workers = workers;
    c.seed = seed;
  }
  if (j.contains("hyper")) merge(c.hyper, j["hyper"]);
  take(j, "max_epochs", c.max_epochs);
  take(j, "patience", c.patience);
  take(j, "quad_reg_eps", c.quad_reg_eps);
  take(j, "holdout_frac", c.holdout_frac);
  take(j, "train_frac", c.train_frac);
  take(j, "seed", c.seed);
  take(j, "jobs", c.jobs);
  take(j, "workers", c.workers);
}

TrainHistory history_from_json(const json& j) {
  try {
    TrainHistory h;
    h.best_epoch = j.at("best_epoch").get<int>();
    h.seconds_to_best = j.at("seconds_to_best").get<double>();
    h.seconds_total = j.at("seconds_total").get<double>();
    h.skipped_singular = j.at("skipped_singular").get<long>();
    for (const auto& e : j.at("epochs")) {
      EpochRecord r;
      r.epoch = e.at("epoch").get<int>();
      r.train_loss = e.at("train_loss").get<double>();
      r.select_metric = e.at("select_metric").get<double>();
      r.test_mse = e.at("test_mse").get<double>();
      r.test_regret = e.at("test_regret").get<double>();
      r.test_srmse = e.at("test_srmse").get<double>();
      r.seconds = e.at("seconds").get<double>();
      h.epochs.push_back(r);
    }
    return h;
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaError, std::string("training history: ") + e.what());
  }
}

json parse_json_object(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, source + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::SchemaError, source + ": expected a JSON object");
  return j;
}

}  // namespace pvdfl
