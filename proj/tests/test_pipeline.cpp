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

#include <json.hpp>

#include "common.hpp"
#include "config_json.hpp"
#include "pipeline.hpp"

using namespace pvdfl;
using nlohmann::json;
using testing::code_of;
namespace fs = std::filesystem;

namespace {

const json kTiny = {{"hyper", {{"layers", 1}, {"hidden_size", 6}, {"dropout_frac", 0.0}, {"learning_rate", 3e-3}}},
                    {"max_epochs", 2},
                    {"patience", 1},
                    {"seed", 5}};

json with(json base, const json& extra) {
  base.merge_patch(extra);
  return base;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = testing::slurp(e.path());
  return out;
}

json epochs_without_time(const fs::path& p) {
  json h = json::parse(testing::slurp(p));
  for (auto& e : h["epochs"]) e.erase("seconds");
  h.erase("seconds_to_best");
  h.erase("seconds_total");
  return h;
}

// gen + three trainings on two buildings, built once
struct Chain {
  testing::TempDir dir{"chain"};
  fs::path data = dir.path / "data", run = dir.path / "run";
  Chain() {
    run_command("gen", {{"out", data.string()}, {"buildings", 2}, {"years", 1}, {"seed", 3}});
    for (const char* r : {"mse", "dfl", "dfl-ws"}) {
      json o = with(kTiny, {{"data", data.string()}, {"out", run.string()}, {"regime", r}});
      if (std::string(r) == "dfl-ws") o["init"] = run.string();
      const CommandOutcome out = run_command("train", o);
      REQUIRE(out.failed_buildings == 0);
    }
  }
};

Chain& chain() {
  static Chain c;
  return c;
}

}  // namespace

TEST_CASE("gen validates and is byte-identical") {
  testing::TempDir a("gena"), b("genb");
  CHECK(code_of([&] { run_command("gen", {{"out", a.path.string()}, {"buildings", 0}}); }) == ErrorCode::ConfigInvalid);
  const json opts = {{"buildings", 2}, {"years", 1}, {"seed", 9}};
  run_command("gen", with(opts, {{"out", (a.path / "d").string()}}));
  run_command("gen", with(opts, {{"out", (b.path / "d").string()}}));
  const auto ta = tree(a.path / "d"), tb = tree(b.path / "d");
  CHECK(ta.size() >= 6);
  CHECK(ta.count("buildings/b01.csv") == 1);
  CHECK(ta.count("manifest_gen.json") == 1);
  for (const auto& [name, content] : ta) {
    if (name == "manifest_gen.json") continue;  // records the output path
    CAPTURE(name);
    CHECK(tb.at(name) == content);
  }
  CHECK(json::parse(ta.at("manifest_gen.json"))["outputs"] == json::parse(tb.at("manifest_gen.json"))["outputs"]);
  CHECK(code_of([&] { run_command("gen", with(opts, {{"out", a.path.string()}, {"colour", 1}})); }) ==
        ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { run_command("fly", json::object()); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("train rejects a warm start without init") {
  Chain& c = chain();
  CHECK(code_of([&] {
          run_command("train", with(kTiny, {{"data", c.data.string()}, {"out", c.run.string()}, {"regime", "dfl-ws"}}));
        }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] {
          run_command("train", with(kTiny, {{"data", c.data.string()},
                                            {"out", c.run.string()},
                                            {"regime", "dfl"},
                                            {"init", c.run.string()}}));
        }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("training chain writes checkpoints, histories and manifests") {
  Chain& c = chain();
  for (const char* r : {"mse", "dfl", "dfl-ws"})
    for (const char* b : {"b01", "b02"}) {
      CHECK(fs::exists(c.run / "checkpoints" / r / (std::string(b) + ".ckpt")));
      CHECK(fs::exists(c.run / "history" / r / (std::string(b) + ".json")));
    }
  CHECK(fs::exists(c.run / "manifest_train_dfl-ws.json"));
}

TEST_CASE("same seed gives the same DFL history") {
  Chain& c = chain();
  testing::TempDir other("rerun");
  run_command("train", with(kTiny, {{"data", c.data.string()},
                                    {"out", other.path.string()},
                                    {"regime", "dfl"},
                                    {"buildings", {"b02"}}}));
  CHECK(epochs_without_time(other.path / "history" / "dfl" / "b02.json") ==
        epochs_without_time(c.run / "history" / "dfl" / "b02.json"));
  CHECK(testing::slurp(other.path / "checkpoints" / "dfl" / "b02.ckpt") ==
        testing::slurp(c.run / "checkpoints" / "dfl" / "b02.ckpt"));
}

TEST_CASE("eval is idempotent and reports six rows") {
  Chain& c = chain();
  const fs::path e1 = c.dir.path / "e1", e2 = c.dir.path / "e2";
  const CommandOutcome r1 = run_command("eval", {{"data", c.data.string()}, {"run", c.run.string()}, {"out", e1.string()}});
  run_command("eval", {{"data", c.data.string()}, {"run", c.run.string()}, {"out", e2.string()}});
  CHECK(r1.failed_buildings == 0);
  CHECK(r1.summary["pooled"].size() == 6);
  CHECK(r1.summary["dm_cost"].size() == 6);
  for (const char* f : {"results_table.csv", "daily_costs.csv", "dm_cost.csv", "dm_error.csv", "forecast_profiles.csv",
                        "battery_profiles.csv"})
    CHECK(testing::slurp(e1 / f) == testing::slurp(e2 / f));

  const CommandOutcome report = run_command("report", {{"dir", e1.string()}});
  const std::string text = report.summary["text"];
  CHECK(text.find("DFL-WS") != std::string::npos);
}

TEST_CASE("single-building eval omits the pooled DM") {
  Chain& c = chain();
  const CommandOutcome r = run_command(
      "eval", {{"data", c.data.string()}, {"run", c.run.string()}, {"out", (c.dir.path / "one").string()}, {"buildings", {"b01"}}});
  CHECK(r.summary["dm_cost"].empty());
  CHECK(r.summary["pooled"].size() == 6);
}

TEST_CASE("missing checkpoints") {
  Chain& c = chain();
  testing::TempDir empty("norun");
  CHECK(code_of([&] {
          run_command("eval", {{"data", c.data.string()}, {"run", empty.path.string()}, {"out", (empty.path / "e").string()}});
        }) == ErrorCode::MissingCheckpoint);
}

TEST_CASE("sweep reuses, trains and resumes") {
  Chain& c = chain();
  const fs::path out = c.dir.path / "sweep";
  const json opts = with(kTiny, {{"data", c.data.string()}, {"run", c.run.string()}, {"out", out.string()},
                                 {"levels", {2, 3}}, {"regimes", {"dfl-ws"}}});
  run_command("sweep", opts);
  const json m = json::parse(testing::slurp(out / "manifest_sweep.json"));
  CHECK(m["levels"][0]["buildings"][0]["models"]["dfl-ws"]["source"] == "baseline");
  CHECK(m["levels"][1]["buildings"][0]["models"]["dfl-ws"]["source"] == "trained");
  const std::string first = testing::slurp(out / "sweep.csv");
  run_command("sweep", opts);
  const json m2 = json::parse(testing::slurp(out / "manifest_sweep.json"));
  CHECK(m2["levels"][1]["buildings"][0]["models"]["dfl-ws"]["source"] == "resumed");
  CHECK(testing::slurp(out / "sweep.csv") == first);
  CHECK(first.rfind("level,model,s_rmse_pct,scaled_cost,buildings\n", 0) == 0);
  CHECK(code_of([&] { run_command("sweep", with(opts, {{"regimes", {"mse"}}})); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { run_command("sweep", with(opts, {{"levels", {8}}})); }) == ErrorCode::ConfigInvalid);
}
