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

#include "pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>

#include "config_json.hpp"
#include "error.hpp"
#include "experiment.hpp"

namespace pvdfl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* const kExperimentKeys[] = {"profile",      "hyper",      "max_epochs", "patience", "quad_reg_eps",
                                       "holdout_frac", "train_frac", "seed",       "jobs",     "workers"};

std::string fnv1a_hex(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

json hash_tree(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename().string().rfind("manifest", 0) != 0) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  json j = json::object();
  for (const auto& f : files) j[fs::relative(f, root).generic_string()] = fnv1a_hex(f);
  return j;
}

std::string required_string(const json& opts, const char* key) {
  const auto it = opts.find(key);
  if (it == opts.end() || !it->is_string() || it->get<std::string>().empty())
    fail(ErrorCode::ConfigInvalid, std::string("missing option '") + key + "'");
  return it->get<std::string>();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
  ensure_dir(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_json_object(ss.str(), path.filename().string());
}

void check_keys(const json& opts, std::initializer_list<const char*> allowed, bool experiment_keys) {
  if (!opts.is_object()) fail(ErrorCode::ConfigInvalid, "options must be a JSON object");
  for (const auto& [k, v] : opts.items()) {
    bool ok = k == "argv";
    for (const char* a : allowed) ok = ok || k == a;
    if (experiment_keys)
      for (const char* a : kExperimentKeys) ok = ok || k == a;
    if (!ok) fail(ErrorCode::ConfigInvalid, "unknown option '" + k + "'");
  }
}

ExperimentConfig experiment_from(const json& opts) {
  ExperimentConfig c;
  json sub = json::object();
  for (const char* k : kExperimentKeys)
    if (opts.contains(k)) sub[k] = opts[k];
  merge(c, sub);
  c.validate();
  return c;
}

std::vector<std::size_t> selected(const Dataset& ds, const json& opts) {
  std::vector<std::size_t> out;
  const auto it = opts.find("buildings");
  if (it == opts.end() || it->empty()) {
    for (std::size_t i = 0; i < ds.buildings.size(); ++i) out.push_back(i);
    return out;
  }
  if (!it->is_array()) fail(ErrorCode::ConfigInvalid, "'buildings' must be a list of ids");
  for (const auto& id : *it) out.push_back(ds.index_of(id.get<std::string>()));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Regime> regimes_from(const json& opts, std::vector<Regime> fallback) {
  const auto it = opts.find("regimes");
  if (it == opts.end()) return fallback;
  std::vector<Regime> out;
  for (const auto& r : *it) out.push_back(regime_from_string(r.get<std::string>()));
  if (out.empty()) fail(ErrorCode::ConfigInvalid, "'regimes' is empty");
  return out;
}

fs::path checkpoint_path(const fs::path& run, Regime regime, const std::string& id) {
  return run / "checkpoints" / to_string(regime) / (id + ".ckpt");
}

fs::path history_path(const fs::path& run, Regime regime, const std::string& id) {
  return run / "history" / to_string(regime) / (id + ".json");
}

ForecastModel load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::MissingCheckpoint, "missing checkpoint " + path.string());
  return ForecastModel::load(path);
}

// --init may name a checkpoint file, a directory of <id>.ckpt files, or a
// run directory.
fs::path resolve_init(const fs::path& init, const std::string& id, std::size_t n_selected) {
  if (fs::is_regular_file(init)) {
    if (n_selected != 1) fail(ErrorCode::ConfigInvalid, "a single --init file needs exactly one building");
    return init;
  }
  if (fs::exists(init / (id + ".ckpt"))) return init / (id + ".ckpt");
  return checkpoint_path(init, Regime::MSE, id);
}

json failures_json(const std::vector<BuildingFailure>& failures) {
  json j = json::array();
  for (const auto& f : failures) j.push_back({{"building", f.building}, {"error", f.message}});
  return j;
}

CommandOutcome finish(json summary, const std::vector<BuildingFailure>& failures) {
  summary["failures"] = failures_json(failures);
  return {std::move(summary), static_cast<int>(failures.size())};
}

std::string error_text(const std::exception& e) { return e.what(); }

// ---------------------------------------------------------------------------

CommandOutcome cmd_gen(const json& opts) {
  check_keys(opts,
             {"out", "buildings", "years", "seed", "load_noise_level", "dni_noise", "load_noise", "tariff",
              "start_hour"},
             false);
  const fs::path out = required_string(opts, "out");
  DatasetConfig cfg;
  json sub = opts;
  sub.erase("out");
  sub.erase("argv");
  merge(cfg, sub);
  const Dataset ds = generate_dataset(cfg);
  save_dataset(ds, out);
  json ids = json::array();
  for (const auto& b : ds.buildings) ids.push_back(b.id);
  json manifest = {{"command", "gen"},
                   {"argv", opts.value("argv", json::array())},
                   {"config", to_json(cfg)},
                   {"buildings", ids},
                   {"outputs", hash_tree(out)}};
  write_json(out / "manifest_gen.json", manifest);
  return finish({{"command", "gen"}, {"out", out.string()}, {"buildings", ids}}, {});
}

CommandOutcome cmd_train(const json& opts) {
  check_keys(opts, {"data", "out", "regime", "init", "buildings"}, true);
  const fs::path data = required_string(opts, "data");
  const fs::path out = required_string(opts, "out");
  const Regime regime = regime_from_string(required_string(opts, "regime"));
  std::optional<fs::path> init;
  if (opts.contains("init") && !opts["init"].get<std::string>().empty()) init = opts["init"].get<std::string>();
  if (regime == Regime::DFL_WS && !init) fail(ErrorCode::ConfigInvalid, "regime dfl-ws requires --init");
  if (regime != Regime::DFL_WS && init) fail(ErrorCode::ConfigInvalid, "--init is only used by regime dfl-ws");
  ExperimentConfig cfg = experiment_from(opts);
  const bool hyper_given = opts.contains("profile") || opts.contains("hyper");

  const Dataset ds = load_dataset(data);
  const std::vector<std::size_t> idx = selected(ds, opts);
  std::vector<json> rows(idx.size());
  std::vector<std::string> errors(idx.size());
  json init_hashes = json::object();
  std::mutex mu;
  for_each_index(idx.size(), cfg.jobs, [&](std::size_t k) {
    const std::size_t i = idx[k];
    const std::string& id = ds.buildings[i].id;
    try {
      std::optional<ForecastModel> start;
      ExperimentConfig local = cfg;
      if (init) {
        const fs::path p = resolve_init(*init, id, idx.size());
        start = load_checkpoint(p);
        if (!hyper_given) local.hyper = start->hyper();
        std::lock_guard lock(mu);
        init_hashes[p.string()] = fnv1a_hex(p);
      }
      const auto t0 = std::chrono::steady_clock::now();
      const BuildingData bd = prepare_building(ds, i, local);
      const TrainResult r = train_regime(bd, regime, local, start ? &*start : nullptr);
      const fs::path ckpt = checkpoint_path(out, regime, id);
      ensure_dir(ckpt.parent_path());
      r.model.save(ckpt);
      write_json(history_path(out, regime, id), to_json(r.history));
      rows[k] = {{"building", id},
                 {"checkpoint", ckpt.string()},
                 {"train_seed", local.train_config(regime, i, bd.level).seed},
                 {"best_epoch", r.history.best_epoch},
                 {"epochs_run", r.history.epochs.back().epoch},
                 {"seconds_to_best", r.history.seconds_to_best},
                 {"seconds_total", r.history.seconds_total},
                 {"wall_seconds",
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                 {"skipped_singular", r.history.skipped_singular},
                 {"test_srmse_best", r.history.epochs[static_cast<std::size_t>(r.history.best_epoch)].test_srmse}};
    } catch (const std::exception& e) {
      errors[k] = error_text(e);
    }
  });
  std::vector<BuildingFailure> failures;
  json per_building = json::array();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (!errors[k].empty()) failures.push_back({ds.buildings[idx[k]].id, errors[k]});
    else per_building.push_back(rows[k]);
  }
  json manifest = {{"command", "train"},
                   {"argv", opts.value("argv", json::array())},
                   {"regime", to_string(regime)},
                   {"experiment", to_json(cfg)},
                   {"init", init ? init->string() : ""},
                   {"inputs", hash_tree(data)},
                   {"init_checkpoints", init_hashes},
                   {"per_building", per_building},
                   {"failures", failures_json(failures)}};
  write_json(out / (std::string("manifest_train_") + to_string(regime) + ".json"), manifest);
  return finish({{"command", "train"}, {"regime", to_string(regime)}, {"per_building", per_building}}, failures);
}

json pooled_json(const EvalReport& report) {
  json rows = json::array();
  for (const auto& r : report.pooled)
    rows.push_back({{"model", r.model},
                    {"s_rmse", r.s_rmse ? json(*r.s_rmse) : json(nullptr)},
                    {"real_cost", r.real_cost},
                    {"relative_cost", r.relative_cost},
                    {"mean_regret", r.mean_regret},
                    {"buildings", r.buildings}});
  return rows;
}

json dm_json(const std::vector<DmResult>& rows) {
  json j = json::array();
  for (const auto& r : rows)
    j.push_back({{"model_a", r.model_a},
                 {"model_b", r.model_b},
                 {"dm_stat", std::isfinite(r.dm_stat) ? json(r.dm_stat) : json(nullptr)},
                 {"p_value", std::isfinite(r.p_value) ? json(r.p_value) : json(nullptr)},
                 {"per_building_significant", r.per_building_significant},
                 {"observations", r.observations}});
  return j;
}

json sweep_json(const std::vector<SweepRow>& rows) {
  json j = json::array();
  for (const auto& r : rows)
    j.push_back({{"level", r.level},
                 {"model", r.model},
                 {"s_rmse", r.s_rmse ? json(*r.s_rmse) : json(nullptr)},
                 {"scaled_cost", r.scaled_cost},
                 {"buildings", r.buildings}});
  return j;
}

std::vector<SweepRow> sweep_from_json(const json& j) {
  std::vector<SweepRow> rows;
  try {
    for (const auto& e : j.at("rows")) {
      SweepRow r;
      r.level = e.at("level").get<int>();
      r.model = e.at("model").get<std::string>();
      if (!e.at("s_rmse").is_null()) r.s_rmse = e.at("s_rmse").get<double>();
      r.scaled_cost = e.at("scaled_cost").get<double>();
      r.buildings = e.at("buildings").get<int>();
      rows.push_back(r);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaError, std::string("sweep rows: ") + e.what());
  }
  return rows;
}

CommandOutcome cmd_eval(const json& opts) {
  check_keys(opts, {"data", "run", "out", "buildings", "regimes", "sweep"}, false);
  const fs::path data = required_string(opts, "data");
  const fs::path run = required_string(opts, "run");
  const fs::path out = opts.contains("out") ? fs::path(opts["out"].get<std::string>()) : run / "eval";
  const fs::path sweep_dir = opts.contains("sweep") ? fs::path(opts["sweep"].get<std::string>()) : run / "sweep";
  const std::vector<Regime> regimes = regimes_from(opts, {Regime::MSE, Regime::DFL, Regime::DFL_WS});
  const Dataset ds = load_dataset(data);
  const std::vector<std::size_t> idx = selected(ds, opts);

  ExperimentConfig cfg;  // only the split matters here
  if (fs::exists(run / "manifest_train_mse.json")) {
    const json m = read_json(run / "manifest_train_mse.json");
    if (m.contains("experiment")) merge(cfg, m["experiment"]);
  }
  EvalReport report;
  std::vector<BuildingFailure> failures;
  ErrorCode first_code = ErrorCode::PreconditionViolated;
  json ckpt_hashes = json::object();
  for (std::size_t i : idx) {
    const std::string& id = ds.buildings[i].id;
    try {
      const BuildingData bd = prepare_building(ds, i, cfg);
      std::map<std::string, std::vector<Day>> fc;
      fc[kNaive] = naive_forecasts(bd.test);
      for (Regime r : regimes) {
        const fs::path p = checkpoint_path(run, r, id);
        fc[model_name(r)] = predict_all(load_checkpoint(p), bd.test);
        ckpt_hashes[fs::relative(p, run).generic_string()] = fnv1a_hex(p);
        const fs::path hp = history_path(run, r, id);
        if (fs::exists(hp)) report.timing.push_back(timing_row(id, r, history_from_json(read_json(hp))));
      }
      report.per_building[id] = evaluate_building(id, bd.test, fc);
    } catch (const Error& e) {
      if (failures.empty()) first_code = e.code();
      failures.push_back({id, e.what()});
    }
  }
  if (report.per_building.empty()) {
    std::string msg = "no building could be evaluated";
    if (!failures.empty()) msg += ": " + failures.front().message;
    fail(first_code, msg);
  }
  if (fs::exists(sweep_dir / "sweep_rows.json")) report.sweep = sweep_from_json(read_json(sweep_dir / "sweep_rows.json"));
  finalize_report(report);
  emit_report(report, out);
  json manifest = {{"command", "eval"},
                   {"argv", opts.value("argv", json::array())},
                   {"train_frac", cfg.train_frac},
                   {"inputs", hash_tree(data)},
                   {"checkpoints", ckpt_hashes},
                   {"infeasible_events", report.infeasible_events},
                   {"failures", failures_json(failures)},
                   {"outputs", hash_tree(out)}};
  write_json(out / "manifest_eval.json", manifest);
  return finish({{"command", "eval"},
                 {"out", out.string()},
                 {"pooled", pooled_json(report)},
                 {"dm_cost", dm_json(report.dm_cost)},
                 {"dm_error", dm_json(report.dm_error)},
                 {"infeasible_events", report.infeasible_events}},
                failures);
}

CommandOutcome cmd_sweep(const json& opts) {
  check_keys(opts, {"data", "run", "out", "levels", "regimes", "buildings"}, true);
  const fs::path data = required_string(opts, "data");
  const fs::path run = required_string(opts, "run");
  const fs::path out = opts.contains("out") ? fs::path(opts["out"].get<std::string>()) : run / "sweep";
  std::vector<int> levels{0, 1, 2, 3, 4, 5, 6};
  if (opts.contains("levels")) levels = opts["levels"].get<std::vector<int>>();
  for (int l : levels)
    if (l < 0 || l > 6) fail(ErrorCode::ConfigInvalid, "sweep levels must lie in 0..6");
  const std::vector<Regime> regimes = regimes_from(opts, {Regime::DFL, Regime::DFL_WS});
  for (Regime r : regimes)
    if (r == Regime::MSE) fail(ErrorCode::ConfigInvalid, "the sweep retrains only dfl and dfl-ws");
  ExperimentConfig cfg = experiment_from(opts);
  const bool hyper_given = opts.contains("profile") || opts.contains("hyper");
  const Dataset ds = load_dataset(data);
  const std::vector<std::size_t> idx = selected(ds, opts);

  std::vector<SweepRow> rows;
  std::vector<BuildingFailure> failures;
  json levels_json = json::array();
  long infeasible = 0;
  for (int level : levels) {
    const fs::path level_dir = out / ("level" + std::to_string(level));
    std::vector<std::optional<BuildingEval>> evals(idx.size());
    std::vector<json> info(idx.size());
    std::vector<std::string> errors(idx.size());
    for_each_index(idx.size(), cfg.jobs, [&](std::size_t k) {
      const std::size_t i = idx[k];
      const std::string& id = ds.buildings[i].id;
      try {
        const ForecastModel mse = load_checkpoint(checkpoint_path(run, Regime::MSE, id));
        ExperimentConfig local = cfg;
        if (!hyper_given) local.hyper = mse.hyper();
        const BuildingData bd = prepare_building(ds, i, local, level);
        std::map<std::string, std::vector<Day>> fc;
        fc[kNaive] = naive_forecasts(bd.test);
        fc[kLstm] = predict_all(mse, bd.test);
        json models = json::object();
        for (Regime r : regimes) {
          const fs::path own = checkpoint_path(level_dir, r, id);
          const fs::path base = checkpoint_path(run, r, id);
          std::string source;
          ForecastModel m;
          if (fs::exists(own)) {
            m = ForecastModel::load(own);
            source = "resumed";
          } else if (level == ds.config.load_noise_level && fs::exists(base)) {
            m = ForecastModel::load(base);
            source = "baseline";
          } else {
            const TrainResult tr = train_regime(bd, r, local, r == Regime::DFL_WS ? &mse : nullptr);
            ensure_dir(own.parent_path());
            tr.model.save(own);
            write_json(history_path(level_dir, r, id), to_json(tr.history));
            m = tr.model;
            source = "trained";
          }
          fc[model_name(r)] = predict_all(m, bd.test);
          models[to_string(r)] = {{"source", source}, {"train_seed", local.train_config(r, i, level).seed}};
        }
        evals[k] = evaluate_building(id, bd.test, fc);
        info[k] = {{"building", id}, {"models", models}};
      } catch (const std::exception& e) {
        errors[k] = error_text(e);
      }
    });
    std::map<std::string, BuildingEval> per_building;
    json level_info = {{"level", level}, {"buildings", json::array()}};
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (!errors[k].empty()) {
        failures.push_back({ds.buildings[idx[k]].id + "@level" + std::to_string(level), errors[k]});
        continue;
      }
      infeasible += evals[k]->infeasible_events;
      level_info["buildings"].push_back(info[k]);
      per_building[evals[k]->id] = std::move(*evals[k]);
    }
    levels_json.push_back(level_info);
    if (per_building.empty()) continue;
    const auto lr = sweep_rows(level, per_building);
    rows.insert(rows.end(), lr.begin(), lr.end());
  }
  ensure_dir(out);
  write_json(out / "sweep_rows.json", {{"rows", sweep_json(rows)}});
  {
    std::ofstream f(out / "sweep.csv");
    f << std::setprecision(std::numeric_limits<double>::max_digits10);
    f << "level,model,s_rmse_pct,scaled_cost,buildings\n";
    for (const auto& r : rows) {
      f << r.level << ',' << r.model << ',';
      if (r.s_rmse) f << *r.s_rmse;
      f << ',' << r.scaled_cost << ',' << r.buildings << '\n';
    }
    if (!f) fail(ErrorCode::IoError, "cannot write sweep.csv");
  }
  json manifest = {{"command", "sweep"},
                   {"argv", opts.value("argv", json::array())},
                   {"experiment", to_json(cfg)},
                   {"levels", levels_json},
                   {"inputs", hash_tree(data)},
                   {"infeasible_events", infeasible},
                   {"failures", failures_json(failures)}};
  write_json(out / "manifest_sweep.json", manifest);
  return finish({{"command", "sweep"}, {"out", out.string()}, {"rows", sweep_json(rows)}}, failures);
}

std::vector<std::vector<std::string>> read_csv_cells(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::string format_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  std::vector<std::vector<std::string>> shown = rows;
  for (auto& r : shown)
    for (auto& c : r) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (!c.empty() && *end == '\0' && c.find('.') != std::string::npos) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", v);
        c = buf;
      }
    }
  for (const auto& r : shown)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (width.size() <= i) width.push_back(0);
      width[i] = std::max(width[i], r[i].size());
    }
  std::ostringstream os;
  for (const auto& r : shown) {
    for (std::size_t i = 0; i < r.size(); ++i) os << std::setw(static_cast<int>(width[i]) + 2) << r[i];
    os << '\n';
  }
  return os.str();
}

CommandOutcome cmd_report(const json& opts) {
  check_keys(opts, {"dir"}, false);
  const fs::path dir = required_string(opts, "dir");
  std::ostringstream text;
  for (const char* name : {"results_table.csv", "dm_cost.csv", "dm_error.csv", "sweep.csv", "timing.csv"}) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) continue;
    text << "== " << name << '\n' << format_table(read_csv_cells(p)) << '\n';
  }
  if (text.str().empty()) fail(ErrorCode::IoError, "no report CSVs in " + dir.string());
  std::ofstream out(dir / "summary.txt");
  out << text.str();
  if (!out) fail(ErrorCode::IoError, "cannot write summary.txt");
  write_json(dir / "manifest_report.json",
             {{"command", "report"}, {"argv", opts.value("argv", json::array())}, {"inputs", hash_tree(dir)}});
  return finish({{"command", "report"}, {"text", text.str()}}, {});
}

}  // namespace

CommandOutcome run_command(const std::string& command, const json& options) {
  if (command == "gen") return cmd_gen(options);
  if (command == "train") return cmd_train(options);
  if (command == "eval") return cmd_eval(options);
  if (command == "sweep") return cmd_sweep(options);
  if (command == "report") return cmd_report(options);
  fail(ErrorCode::ConfigInvalid, "unknown command '" + command + "'");
}

}  // namespace pvdfl
