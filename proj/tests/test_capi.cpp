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

// Exercises the shared library through pvdfl.h only.

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pvdfl.h"

namespace fs = std::filesystem;

namespace {

struct Day {
  std::vector<double> pv, load, pim, pex;
};

Day sunny_day() {
  Day d;
  for (int t = 0; t < 24; ++t) {
    const double env = (t > 5 && t < 20) ? std::sin(3.14159265358979 * (t - 5) / 15.0) : 0.0;
    d.pv.push_back(3.0 * env);
    d.load.push_back(0.5 + 0.3 * std::cos(t / 4.0));
    d.pim.push_back(0.3 + 0.05 * std::sin(t / 3.0));
    d.pex.push_back(d.pim.back() - 0.15);
  }
  return d;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(pvdfl_status_name(PVDFL_OK)) == "Ok");
  CHECK(std::string(pvdfl_status_name(PVDFL_CONFIG_INVALID)) == "ConfigInvalid");
  CHECK(std::string(pvdfl_status_name(PVDFL_MISSING_CHECKPOINT)) == "MissingCheckpoint");
  CHECK(std::string(pvdfl_status_name(PVDFL_NULL_ARGUMENT)) == "NullArgument");
  CHECK(std::string(pvdfl_status_name(static_cast<pvdfl_status>(55))) == "Unknown");
  CHECK(std::strlen(pvdfl_version()) > 0);
}

TEST_CASE("null arguments") {
  CHECK(pvdfl_battery_for_load(5.0, nullptr) == PVDFL_NULL_ARGUMENT);
  CHECK(std::string(pvdfl_last_error()).find("NULL") != std::string::npos);
  double out = 0.0;
  CHECK(pvdfl_s_rmse(2, nullptr, &out, &out) == PVDFL_NULL_ARGUMENT);
  CHECK(pvdfl_run_command(nullptr, "{}", nullptr, nullptr) == PVDFL_NULL_ARGUMENT);
  pvdfl_model* m = nullptr;
  CHECK(pvdfl_model_load(nullptr, &m) == PVDFL_NULL_ARGUMENT);
  CHECK(pvdfl_dataset_building_count(nullptr) == 0);
  CHECK(pvdfl_dataset_building_id(nullptr, 0) == nullptr);
  pvdfl_model_free(nullptr);
  pvdfl_dataset_free(nullptr);
}

TEST_CASE("errors map to status codes") {
  double out = 0.0;
  const double pv[2] = {0.0, 0.0};
  CHECK(pvdfl_s_rmse(2, pv, pv, &out) == PVDFL_ZERO_MAX_PV);
  CHECK(pvdfl_relative_cost(1.0, 2.0, 2.0, &out) == PVDFL_DEGENERATE_SCALE);
  CHECK(pvdfl_battery_for_load(0.0, reinterpret_cast<pvdfl_battery*>(&out)) == PVDFL_PRECONDITION_VIOLATED);
  char* summary = nullptr;
  CHECK(pvdfl_run_command("gen", "{\"buildings\": 0, \"out\": \"/nonexistent/x\"}", &summary, nullptr) ==
        PVDFL_CONFIG_INVALID);
  CHECK(summary == nullptr);
  CHECK(pvdfl_run_command("gen", "{not json", &summary, nullptr) == PVDFL_PARSE_ERROR);
  pvdfl_model* m = nullptr;
  CHECK(pvdfl_model_load("/nonexistent/m.ckpt", &m) == PVDFL_MISSING_CHECKPOINT);
  CHECK(m == nullptr);
  CHECK(std::strlen(pvdfl_last_error()) > 0);
  // a later success clears the message
  CHECK(pvdfl_relative_cost(1.5, 1.0, 2.0, &out) == PVDFL_OK);
  CHECK(std::string(pvdfl_last_error()).empty());
  CHECK(out == doctest::Approx(50.0));
}

TEST_CASE("metrics") {
  const double a[2] = {0.0, 2.0}, p[2] = {0.0, 0.0};
  double v = 0.0;
  REQUIRE(pvdfl_s_rmse(2, p, a, &v) == PVDFL_OK);
  CHECK(v == doctest::Approx(70.7107).epsilon(1e-5));
  std::vector<double> la(100), lb(100, 0.0);
  for (int t = 0; t < 100; ++t) la[t] = 0.1 + (t % 2 ? -0.01 : 0.01);
  double dm = 0.0, pval = 1.0;
  REQUIRE(pvdfl_dm_test(100, la.data(), lb.data(), 1, &dm, &pval) == PVDFL_OK);
  CHECK(dm == doctest::Approx(100.0));
  CHECK(pvdfl_dm_test(100, la.data(), la.data(), 1, &dm, &pval) == PVDFL_ZERO_VARIANCE);
}

TEST_CASE("scheduling through the C API") {
  const Day d = sunny_day();
  pvdfl_battery b;
  REQUIRE(pvdfl_battery_for_load(5.0, &b) == PVDFL_OK);
  CHECK(b.capacity_kwh == doctest::Approx(5.5));
  std::vector<double> ch(24), dis(24), soc(25);
  double cost = 0.0, replay = 0.0, noopt = 0.0;
  REQUIRE(pvdfl_solve_day(24, d.pv.data(), d.load.data(), d.pim.data(), d.pex.data(), &b, 0.0, ch.data(), dis.data(),
                          soc.data(), &cost) == PVDFL_OK);
  CHECK(soc[0] == doctest::Approx(0.5 * 5.5));
  REQUIRE(pvdfl_evaluate_fixed(24, d.pv.data(), d.load.data(), d.pim.data(), d.pex.data(), &b, ch.data(), dis.data(),
                               &replay) == PVDFL_OK);
  CHECK(replay == doctest::Approx(cost).epsilon(1e-6));
  REQUIRE(pvdfl_no_opt_cost(24, d.pv.data(), d.load.data(), d.pim.data(), d.pex.data(), &noopt) == PVDFL_OK);
  CHECK(noopt >= cost - 1e-6);

  std::vector<double> bad = d.pex;
  bad[5] = 1.0;
  CHECK(pvdfl_solve_day(24, d.pv.data(), d.load.data(), d.pim.data(), bad.data(), &b, 0.0, nullptr, nullptr, nullptr,
                        &cost) == PVDFL_PRICE_INVERSION);
  CHECK(pvdfl_solve_day(24, d.pv.data(), d.load.data(), d.pim.data(), d.pex.data(), &b, -1.0, nullptr, nullptr,
                        nullptr, &cost) == PVDFL_PRECONDITION_VIOLATED);
}

TEST_CASE("regret through the C API") {
  const Day d = sunny_day();
  pvdfl_battery b;
  pvdfl_battery_for_load(5.0, &b);
  std::vector<double> fc = d.pv;
  for (double& v : fc) v = v > 0 ? v + 0.5 : 0.0;
  double r1 = 0.0, r2 = 0.0;
  std::vector<double> grad(24);
  REQUIRE(pvdfl_regret(fc.data(), d.pv.data(), d.load.data(), d.pim.data(), d.pex.data(), &b, 1e-3, &r1,
                       grad.data()) == PVDFL_OK);
  REQUIRE(pvdfl_regret(fc.data(), d.pv.data(), d.load.data(), d.pim.data(), d.pex.data(), &b, 1e-3, &r2, nullptr) ==
          PVDFL_OK);
  CHECK(r1 > 0.0);
  CHECK(r2 == doctest::Approx(r1).epsilon(1e-5));
  for (double g : grad) CHECK(std::isfinite(g));
  CHECK(pvdfl_regret(fc.data(), d.pv.data(), d.load.data(), d.pim.data(), d.pex.data(), &b, 0.0, &r1, grad.data()) ==
        PVDFL_PRECONDITION_VIOLATED);
}

TEST_CASE("pipeline, dataset and model handles") {
  const fs::path root = fs::temp_directory_path() / ("pvdfl_capi_" + std::to_string(std::random_device{}()));
  const std::string data = (root / "data").string(), run = (root / "run").string();
  char* summary = nullptr;
  int failed = -1;
  REQUIRE(pvdfl_run_command("gen", ("{\"out\":\"" + data + "\",\"buildings\":1,\"years\":1}").c_str(), &summary,
                            &failed) == PVDFL_OK);
  CHECK(failed == 0);
  CHECK(std::string(summary).find("\"gen\"") != std::string::npos);
  pvdfl_free_string(summary);

  pvdfl_dataset* ds = nullptr;
  REQUIRE(pvdfl_dataset_load(data.c_str(), &ds) == PVDFL_OK);
  CHECK(pvdfl_dataset_building_count(ds) == 1);
  CHECK(std::string(pvdfl_dataset_building_id(ds, 0)) == "b01");
  CHECK(pvdfl_dataset_building_id(ds, 1) == nullptr);
  pvdfl_battery b;
  CHECK(pvdfl_dataset_battery(ds, 0, &b) == PVDFL_OK);
  CHECK(b.capacity_kwh > 0.0);
  CHECK(pvdfl_dataset_battery(ds, 3, &b) == PVDFL_PRECONDITION_VIOLATED);
  pvdfl_dataset_free(ds);

  const std::string train = "{\"data\":\"" + data + "\",\"out\":\"" + run +
                            "\",\"regime\":\"mse\",\"max_epochs\":2,\"patience\":1,"
                            "\"hyper\":{\"layers\":1,\"hidden_size\":4}}";
  REQUIRE(pvdfl_run_command("train", train.c_str(), nullptr, &failed) == PVDFL_OK);
  pvdfl_model* m = nullptr;
  REQUIRE(pvdfl_model_load((root / "run" / "checkpoints" / "mse" / "b01.ckpt").c_str(), &m) == PVDFL_OK);
  std::vector<double> hist(24, 1.0), dni(24, 400.0), out(24, -1.0);
  REQUIRE(pvdfl_model_predict(m, hist.data(), dni.data(), out.data()) == PVDFL_OK);
  for (double v : out) CHECK(v >= 0.0);
  pvdfl_model_free(m);
  fs::remove_all(root);
}
