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

// Command-line front end. Talks to the library only through pvdfl.h.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pvdfl.h"

using nlohmann::json;

namespace {

std::string output_root() {
  const char* env = std::getenv("PVDFL_OUTPUT_ROOT");
  return env && *env ? env : "pvdfl-out";
}

struct Experiment {
  std::string profile = "full";
  int max_epochs = 300;
  int patience = 20;
  double quad_reg_eps = 1e-3;
  double holdout_frac = 0.0;
  std::uint64_t seed = 7;
  int jobs = std::max(1u, std::thread::hardware_concurrency());
  int workers = 1;
};

void add_experiment_flags(CLI::App* cmd, Experiment& e) {
  cmd->add_option("--profile", e.profile, "LSTM profile: full (3x200, lr 1e-4) or bench (2x64, lr 1e-3)")
      ->check(CLI::IsMember({"full", "bench"}));
  cmd->add_option("--max-epochs", e.max_epochs);
  cmd->add_option("--patience", e.patience);
  cmd->add_option("--quad-reg-eps", e.quad_reg_eps, "quadratic regularization of training solves");
  cmd->add_option("--holdout-frac", e.holdout_frac, "select epochs on a tail of the train split instead of test");
  cmd->add_option("--seed", e.seed);
  cmd->add_option("--jobs", e.jobs, "buildings in parallel");
  cmd->add_option("--workers", e.workers, "regret evaluations in parallel per batch");
}

// Only flags given on the command line enter the options, so library
// defaults stay in one place.
void put_experiment(const CLI::App* cmd, const Experiment& e, json& o) {
  if (cmd->count("--profile")) o["profile"] = e.profile;
  if (cmd->count("--max-epochs")) o["max_epochs"] = e.max_epochs;
  if (cmd->count("--patience")) o["patience"] = e.patience;
  if (cmd->count("--quad-reg-eps")) o["quad_reg_eps"] = e.quad_reg_eps;
  if (cmd->count("--holdout-frac")) o["holdout_frac"] = e.holdout_frac;
  if (cmd->count("--seed")) o["seed"] = e.seed;
  o["jobs"] = e.jobs;
  o["workers"] = e.workers;
}

json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str());
  if (!j.is_object()) throw std::runtime_error("config file must hold a JSON object");
  return j;
}

std::vector<std::string> split_ids(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int run(const std::string& command, json options) {
  char* summary = nullptr;
  int failed = 0;
  const std::string text = options.dump();
  const pvdfl_status st = pvdfl_run_command(command.c_str(), text.c_str(), &summary, &failed);
  if (st != PVDFL_OK) {
    std::cerr << "error: " << pvdfl_last_error() << '\n';
    return 3;
  }
  const json s = json::parse(summary);
  pvdfl_free_string(summary);
  if (command == "report")
    std::cout << s["text"].get<std::string>();
  else
    std::cout << s.dump(2) << '\n';
  for (const auto& f : s["failures"])
    std::cerr << "failed: " << f["building"].get<std::string>() << ": " << f["error"].get<std::string>() << '\n';
  return failed > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PV-battery scheduling with decision-focused PV forecasts"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file whose keys override command-line flags");

  json argv_json = json::array();
  for (int i = 0; i < argc; ++i) argv_json.push_back(argv[i]);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  int n_buildings = 5, years = 3, level = 2;
  std::uint64_t gen_seed = 7;
  std::string gen_out;
  gen->add_option("--buildings", n_buildings, "number of households");
  gen->add_option("--years", years);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--load-noise-level", level, "load forecast noise level 0..6");
  gen->add_option("--out", gen_out, "dataset directory (default $PVDFL_OUTPUT_ROOT/data)");

  // train
  auto* train = app.add_subcommand("train", "train one regime for every building");
  Experiment train_e;
  std::string train_data, train_out, regime, init, train_ids;
  train->add_option("--data", train_data)->required();
  train->add_option("--regime", regime)->required()->check(CLI::IsMember({"mse", "dfl", "dfl-ws"}));
  train->add_option("--init", init, "MSE checkpoint file, directory of <id>.ckpt, or run directory");
  train->add_option("--out", train_out, "run directory (default $PVDFL_OUTPUT_ROOT/run)");
  train->add_option("--buildings", train_ids, "comma-separated building ids");
  add_experiment_flags(train, train_e);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate trained checkpoints on the test split");
  std::string eval_data, eval_run, eval_out, eval_ids, eval_regimes;
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--run", eval_run)->required();
  eval->add_option("--out", eval_out, "report directory (default <run>/eval)");
  eval->add_option("--buildings", eval_ids, "comma-separated building ids");
  eval->add_option("--regimes", eval_regimes, "comma-separated subset of mse,dfl,dfl-ws");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "load-noise sweep");
  Experiment sweep_e;
  std::string sweep_data, sweep_run, sweep_out, sweep_levels, sweep_regimes, sweep_ids;
  sweep->add_option("--data", sweep_data)->required();
  sweep->add_option("--run", sweep_run, "run directory holding the MSE checkpoints")->required();
  sweep->add_option("--out", sweep_out, "default <run>/sweep");
  sweep->add_option("--levels", sweep_levels, "comma-separated levels (default 0..6)");
  sweep->add_option("--regimes", sweep_regimes, "comma-separated subset of dfl,dfl-ws");
  sweep->add_option("--buildings", sweep_ids, "comma-separated building ids");
  add_experiment_flags(sweep, sweep_e);

  // report
  auto* report = app.add_subcommand("report", "print the tables of an eval directory");
  std::string report_dir;
  report->add_option("--dir", report_dir, "eval output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    json o = json::object();
    std::string command;
    if (*gen) {
      command = "gen";
      o["buildings"] = n_buildings;
      o["years"] = years;
      o["seed"] = gen_seed;
      o["load_noise_level"] = level;
      o["out"] = gen_out.empty() ? output_root() + "/data" : gen_out;
    } else if (*train) {
      command = "train";
      o["data"] = train_data;
      o["regime"] = regime;
      if (!init.empty()) o["init"] = init;
      o["out"] = train_out.empty() ? output_root() + "/run" : train_out;
      if (!train_ids.empty()) o["buildings"] = split_ids(train_ids);
      put_experiment(train, train_e, o);
    } else if (*eval) {
      command = "eval";
      o["data"] = eval_data;
      o["run"] = eval_run;
      if (!eval_out.empty()) o["out"] = eval_out;
      if (!eval_ids.empty()) o["buildings"] = split_ids(eval_ids);
      if (!eval_regimes.empty()) o["regimes"] = split_ids(eval_regimes);
    } else if (*sweep) {
      command = "sweep";
      o["data"] = sweep_data;
      o["run"] = sweep_run;
      if (!sweep_out.empty()) o["out"] = sweep_out;
      if (!sweep_levels.empty()) {
        json lv = json::array();
        for (const auto& s : split_ids(sweep_levels)) lv.push_back(std::stoi(s));
        o["levels"] = lv;
      }
      if (!sweep_regimes.empty()) o["regimes"] = split_ids(sweep_regimes);
      if (!sweep_ids.empty()) o["buildings"] = split_ids(sweep_ids);
      put_experiment(sweep, sweep_e, o);
    } else {
      command = "report";
      o["dir"] = report_dir;
    }
    if (!config_path.empty()) o.merge_patch(read_config(config_path));
    if (command != "report") o["argv"] = argv_json;
    return run(command, o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
