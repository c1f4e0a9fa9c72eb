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

#include "common.hpp"
#include "config_json.hpp"
#include "experiment.hpp"
#include "fixture.hpp"

using namespace pvdfl;
using testing::code_of;

TEST_CASE("dataset config validation") {
  DatasetConfig c;
  c.buildings = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::ConfigInvalid);
  c = DatasetConfig{};
  c.load_noise_level = 7;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("dataset save/load round-trip") {
  const Dataset& ds = testing::small_dataset();
  testing::TempDir dir("ds");
  save_dataset(ds, dir.path);
  const Dataset back = load_dataset(dir.path);
  REQUIRE(back.buildings.size() == ds.buildings.size());
  for (std::size_t i = 0; i < ds.buildings.size(); ++i) {
    CHECK(back.buildings[i].id == ds.buildings[i].id);
    CHECK(back.buildings[i].battery == ds.buildings[i].battery);
    CHECK(back.buildings[i].load_series.values == ds.buildings[i].load_series.values);
    CHECK(back.buildings[i].pv_series.values == ds.buildings[i].pv_series.values);
    CHECK(back.load_forecast[i].values == ds.load_forecast[i].values);
  }
  CHECK(back.dni.values == ds.dni.values);
  CHECK(back.dni_forecast.values == ds.dni_forecast.values);
  CHECK(back.price_import.values == ds.price_import.values);
  CHECK(back.price_export.values == ds.price_export.values);
  CHECK(to_json(back.config) == to_json(ds.config));

  // a deleted load forecast is regenerated from the noise settings
  std::filesystem::remove(dir.path / "load_forecasts" / (ds.buildings[1].id + ".csv"));
  CHECK(load_dataset(dir.path).load_forecast[1].values == ds.load_forecast[1].values);
}

TEST_CASE("load forecasts per level share one noise stream") {
  const Dataset& ds = testing::small_dataset();
  CHECK(load_forecast_at_level(ds, 0, ds.config.load_noise_level).values == ds.load_forecast[0].values);
  CHECK(load_forecast_at_level(ds, 0, 0).values == ds.buildings[0].load_series.values);
  CHECK(load_forecast_at_level(ds, 0, 4).values != ds.load_forecast[0].values);
  CHECK(code_of([&] { load_forecast_at_level(ds, 0, 9); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("generation is deterministic") {
  DatasetConfig c;
  c.buildings = 2;
  c.years = 1;
  c.seed = 11;
  const Dataset a = generate_dataset(c);
  const Dataset& b = testing::small_dataset();
  CHECK(a.buildings[1].load_series.values == b.buildings[1].load_series.values);
  CHECK(a.price_import.values == b.price_import.values);
  c.seed = 12;
  CHECK(generate_dataset(c).buildings[0].pv_series.values != b.buildings[0].pv_series.values);
}

TEST_CASE("experiment config JSON") {
  ExperimentConfig c = ExperimentConfig::profile("bench");
  CHECK(c.hyper.layers == 2);
  CHECK(c.hyper.hidden_size == 64);
  CHECK(ExperimentConfig::profile("full").hyper == LstmHyper{});
  CHECK(code_of([] { ExperimentConfig::profile("huge"); }) == ErrorCode::ConfigInvalid);

  ExperimentConfig d;
  merge(d, to_json(c));
  CHECK(to_json(d) == to_json(c));

  merge(d, nlohmann::json{{"max_epochs", 12}, {"hyper", {{"hidden_size", 9}}}});
  CHECK(d.max_epochs == 12);
  CHECK(d.hyper.hidden_size == 9);
  CHECK(d.hyper.layers == 2);
  CHECK(code_of([&] { merge(d, nlohmann::json{{"epochs", 3}}); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { merge(d, nlohmann::json{{"hyper", {{"units", 3}}}}); }) == ErrorCode::ConfigInvalid);

  CHECK(code_of([] { parse_json_object("[1,2]", "x"); }) == ErrorCode::SchemaError);
  CHECK(code_of([] { parse_json_object("{oops", "x"); }) == ErrorCode::ParseError);
}

TEST_CASE("train seeds differ by regime, building and level") {
  const ExperimentConfig c;
  const auto s = [&](Regime r, std::size_t b, int l) { return c.train_config(r, b, l).seed; };
  CHECK(s(Regime::DFL, 0, 2) == s(Regime::DFL, 0, 2));
  CHECK(s(Regime::DFL, 0, 2) != s(Regime::DFL_WS, 0, 2));
  CHECK(s(Regime::DFL, 0, 2) != s(Regime::DFL, 1, 2));
  CHECK(s(Regime::DFL, 0, 2) != s(Regime::DFL, 0, 3));
}

TEST_CASE("history JSON round-trip") {
  TrainHistory h;
  h.best_epoch = 1;
  h.seconds_to_best = 0.5;
  h.seconds_total = 1.25;
  h.skipped_singular = 2;
  h.epochs.push_back({0, 0.0, 0.3, 0.3, 0.1, 12.0, 0.1});
  h.epochs.push_back({1, 0.2, 0.25, 0.25, 0.09, 11.0, 0.5});
  const TrainHistory back = history_from_json(to_json(h));
  CHECK(back.best_epoch == 1);
  CHECK(back.skipped_singular == 2);
  REQUIRE(back.epochs.size() == 2);
  CHECK(back.epochs[1].test_regret == 0.09);
  CHECK(to_json(back) == to_json(h));
}

TEST_CASE("for_each_index rethrows") {
  std::vector<int> hit(10, 0);
  for_each_index(10, 3, [&](std::size_t i) { hit[i] = 1; });
  for (int v : hit) CHECK(v == 1);
  CHECK(code_of([] {
          for_each_index(4, 2, [](std::size_t i) {
            if (i == 2) fail(ErrorCode::IoError, "x");
          });
        }) == ErrorCode::IoError);
}

TEST_CASE("run_experiment on a small dataset") {
  ExperimentConfig c = testing::tiny_config(2);
  c.patience = 1;
  const ExperimentResult r = run_experiment(testing::small_dataset(), c);
  CHECK(r.failures.empty());
  CHECK(r.report.per_building.size() == 2);
  CHECK(r.report.pooled.size() == 6);
  CHECK(r.report.timing.size() == 6);
  CHECK(r.report.dm_cost.size() == 6);
}
