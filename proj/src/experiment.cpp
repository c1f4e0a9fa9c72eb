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

#include "experiment.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <atomic>
#include <thread>

#include "config_json.hpp"
#include "error.hpp"

namespace pvdfl {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kTagWeather = 1;
constexpr std::uint64_t kTagHouse = 2;
constexpr std::uint64_t kTagDni = 3;
constexpr std::uint64_t kTagLoad = 4;
constexpr std::uint64_t kTagTariff = 5;
constexpr std::uint64_t kTagInit = 16;   // + regime
constexpr std::uint64_t kTagTrain = 32;  // + regime

std::string building_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "b%02zu", i + 1);
  return buf;
}

// Same derivation as load_buildings(), so a saved dataset reloads equal.
void size_from_load(Building& b) {
  double total = 0.0;
  for (double v : b.load_series.values) total += v;
  b.yearly_load_mwh = total / 1000.0 / (static_cast<double>(b.load_series.size()) / 8760.0);
  b.battery = size_battery(b.yearly_load_mwh);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_series_csv(const std::filesystem::path& path, const std::string& header,
                      const std::vector<const HourlySeries*>& columns) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << header << '\n';
  const HourlySeries& first = *columns.front();
  for (std::size_t i = 0; i < first.size(); ++i) {
    out << first.start_hour + static_cast<std::int64_t>(i);
    for (const auto* c : columns) out << ',' << c->values[i];
    out << '\n';
  }
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<HourlySeries> read_series_csv(const std::filesystem::path& path, const std::string& header,
                                          const std::vector<Unit>& units) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  const std::string source = path.filename().string();
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::ParseError, source + ":1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) fail(ErrorCode::SchemaError, source + ":1: expected header '" + header + "'");
  std::vector<std::vector<double>> cols(units.size());
  std::int64_t first_hour = 0;
  std::size_t lineno = 1, rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != units.size() + 1) fail(ErrorCode::SchemaError, where + ": wrong number of columns");
    std::int64_t hour = 0;
    const auto [p, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), hour);
    if (ec != std::errc() || p != cells[0].data() + cells[0].size()) fail(ErrorCode::ParseError, where + ": bad hour");
    if (rows == 0) first_hour = hour;
    else if (hour != first_hour + static_cast<std::int64_t>(rows))
      fail(ErrorCode::SchemaError, where + ": hours are not consecutive");
    for (std::size_t c = 0; c < units.size(); ++c) {
      char* end = nullptr;
      const double v = std::strtod(cells[c + 1].c_str(), &end);
      if (cells[c + 1].empty() || *end != '\0') fail(ErrorCode::ParseError, where + ": bad number '" + cells[c + 1] + "'");
      cols[c].push_back(v);
    }
    ++rows;
  }
  std::vector<HourlySeries> out;
  for (std::size_t c = 0; c < units.size(); ++c)
    out.push_back(HourlySeries::make(first_hour, std::move(cols[c]), units[c], false, units[c] != Unit::EurPerKWh));
  return out;
}

constexpr const char* kSeriesHeader = "hour,dni_wm2,dni_forecast_wm2,price_import_eur_kwh,price_export_eur_kwh";
constexpr const char* kLoadHeader = "hour,load_forecast_kwh";

}  // namespace

void DatasetConfig::validate() const {
  if (buildings < 1) fail(ErrorCode::ConfigInvalid, "buildings must be >= 1");
  if (years < 1) fail(ErrorCode::ConfigInvalid, "years must be >= 1");
  if (load_noise_level < 0 || load_noise_level > 6) fail(ErrorCode::ConfigInvalid, "load noise level must lie in 0..6");
  dni_noise.validate();
  load_noise.validate();
  tariff.validate();
}

std::size_t Dataset::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < buildings.size(); ++i)
    if (buildings[i].id == id) return i;
  fail(ErrorCode::PreconditionViolated, "no building '" + id + "' in the dataset");
}

Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  Dataset ds;
  ds.config = config;
  const Weather weather = synth_weather(derive_seed(config.seed, kTagWeather), config.years, config.start_hour);
  for (int i = 0; i < config.buildings; ++i) {
    Building b = synth_household(derive_seed(config.seed, kTagHouse, static_cast<std::uint64_t>(i)), config.years,
                                 weather);
    b.id = building_id(static_cast<std::size_t>(i));
    size_from_load(b);
    ds.buildings.push_back(std::move(b));
  }
  const std::size_t hours = ds.buildings.front().pv_series.size();
  ds.dni = HourlySeries::make(weather.dni.start_hour,
                              std::vector<double>(weather.dni.values.begin(), weather.dni.values.begin() +
                                                                                  static_cast<std::ptrdiff_t>(hours)),
                              weather.dni.unit, true, true);
  NoiseSpec dni_spec = config.dni_noise;
  dni_spec.seed = derive_seed(config.seed, kTagDni);
  ds.dni_forecast = apply_forecast_noise(ds.dni, dni_spec);
  TariffConfig tariff = config.tariff;
  tariff.seed = derive_seed(config.seed, kTagTariff);
  std::tie(ds.price_import, ds.price_export) = generate_tariff(tariff, hours, config.start_hour);
  for (std::size_t i = 0; i < ds.buildings.size(); ++i)
    ds.load_forecast.push_back(load_forecast_at_level(ds, i, config.load_noise_level));
  return ds;
}

HourlySeries load_forecast_at_level(const Dataset& dataset, std::size_t building, int level) {
  if (building >= dataset.buildings.size()) fail(ErrorCode::PreconditionViolated, "building index out of range");
  if (level < 0 || level > 6) fail(ErrorCode::ConfigInvalid, "load noise level must lie in 0..6");
  NoiseSpec spec = noise_level_to_spec(level, dataset.config.load_noise);
  spec.seed = derive_seed(dataset.config.seed, kTagLoad, building);
  return apply_forecast_noise(dataset.buildings[building].load_series, spec);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "buildings", ec);
  if (!ec) std::filesystem::create_directories(dir / "load_forecasts", ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json j = {{"config", to_json(ds.config)}, {"buildings", nlohmann::json::array()}};
  for (std::size_t i = 0; i < ds.buildings.size(); ++i) {
    const Building& b = ds.buildings[i];
    write_building_csv(dir / "buildings" / (b.id + ".csv"), b);
    write_series_csv(dir / "load_forecasts" / (b.id + ".csv"), kLoadHeader, {&ds.load_forecast[i]});
    j["buildings"].push_back(b.id);
  }
  write_series_csv(dir / "series.csv", kSeriesHeader,
                   {&ds.dni, &ds.dni_forecast, &ds.price_import, &ds.price_export});
  std::ofstream out(dir / "dataset.json");
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::IoError, "cannot write dataset.json");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  const nlohmann::json j = parse_json_object(slurp(dir / "dataset.json"), "dataset.json");
  if (!j.contains("config")) fail(ErrorCode::SchemaError, "dataset.json: missing 'config'");
  merge(ds.config, j["config"]);
  ds.buildings = load_buildings(dir / "buildings");
  if (ds.buildings.empty()) fail(ErrorCode::SchemaError, dir.string() + ": no building CSVs");
  ds.config.buildings = static_cast<int>(ds.buildings.size());
  auto series = read_series_csv(dir / "series.csv", kSeriesHeader, {Unit::WPerM2, Unit::WPerM2,
                                                                     Unit::EurPerKWh, Unit::EurPerKWh});
  ds.dni = std::move(series[0]);
  ds.dni_forecast = std::move(series[1]);
  ds.price_import = std::move(series[2]);
  ds.price_export = std::move(series[3]);
  for (std::size_t i = 0; i < ds.buildings.size(); ++i) {
    const auto path = dir / "load_forecasts" / (ds.buildings[i].id + ".csv");
    if (std::filesystem::exists(path))
      ds.load_forecast.push_back(std::move(read_series_csv(path, kLoadHeader, {Unit::kWh})[0]));
    else
      ds.load_forecast.push_back(load_forecast_at_level(ds, i, ds.config.load_noise_level));
  }
  return ds;
}

ExperimentConfig ExperimentConfig::profile(const std::string& name) {
  ExperimentConfig c;
  if (name == "full") return c;
  if (name == "bench") {
    c.hyper.layers = 2;
    c.hyper.hidden_size = 64;
    c.hyper.learning_rate = 1e-3;
    return c;
  }
  fail(ErrorCode::ConfigInvalid, "unknown profile '" + name + "' (expected full or bench)");
}

void ExperimentConfig::validate() const {
  train_config(Regime::MSE, 0, 0).validate();
  if (!(train_frac > 0.0 && train_frac < 1.0)) fail(ErrorCode::ConfigInvalid, "train_frac must lie in (0,1)");
  if (jobs < 1) fail(ErrorCode::ConfigInvalid, "jobs must be >= 1");
}

TrainConfig ExperimentConfig::train_config(Regime regime, std::size_t building, int level) const {
  TrainConfig t;
  t.regime = regime;
  t.max_epochs = max_epochs;
  t.patience = patience;
  t.seed = derive_seed(derive_seed(seed, kTagTrain + static_cast<std::uint64_t>(regime), building),
                       static_cast<std::uint64_t>(level));
  t.quad_reg_eps = quad_reg_eps;
  t.hyper = hyper;
  t.holdout_frac = holdout_frac;
  t.workers = workers;
  return t;
}

BuildingData prepare_building(const Dataset& dataset, std::size_t index, const ExperimentConfig& config,
                              std::optional<int> level) {
  if (index >= dataset.buildings.size()) fail(ErrorCode::PreconditionViolated, "building index out of range");
  BuildingData d;
  d.id = dataset.buildings[index].id;
  d.index = index;
  d.level = level.value_or(dataset.config.load_noise_level);
  const HourlySeries load_fc =
      level && *level != dataset.config.load_noise_level ? load_forecast_at_level(dataset, index, *level)
                                                         : dataset.load_forecast[index];
  auto samples = make_samples(dataset.buildings[index], dataset.dni_forecast, load_fc, dataset.price_import,
                              dataset.price_export);
  std::tie(d.train, d.test) = split_chronological(std::move(samples), config.train_frac);
  cache_perfect_costs(d.train);
  cache_perfect_costs(d.test);
  return d;
}

TrainResult train_regime(const BuildingData& data, Regime regime, const ExperimentConfig& config,
                         const ForecastModel* init) {
  TrainConfig tc = config.train_config(regime, data.index, data.level);
  if (regime == Regime::DFL_WS) {
    if (!init) fail(ErrorCode::ConfigInvalid, "warm-start training needs an MSE checkpoint");
    if (!(init->hyper() == config.hyper))
      fail(ErrorCode::ConfigInvalid, "checkpoint hyperparameters differ from the configured ones");
    return train_dfl(*init, data.train, data.test, tc);
  }
  ForecastModel model(config.hyper, derive_seed(config.seed, kTagInit + static_cast<std::uint64_t>(regime), data.index));
  fit_normalization(model, data.train);
  return regime == Regime::MSE ? train_mse(std::move(model), data.train, data.test, tc)
                               : train_dfl(std::move(model), data.train, data.test, tc);
}

std::vector<Day> naive_forecasts(const std::vector<Sample>& samples) {
  std::vector<Day> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(naive_forecast(s.window.pv_hist));
  return out;
}

void for_each_index(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  std::vector<std::exception_ptr> errors(n);
  const auto run = [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < w; ++k)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

TimingRow timing_row(const std::string& building, Regime regime, const TrainHistory& history) {
  TimingRow r;
  r.building = building;
  r.regime = model_name(regime);
  r.best_epoch = history.best_epoch;
  r.epochs_run = history.epochs.empty() ? 0 : history.epochs.back().epoch;
  r.seconds_to_best = history.seconds_to_best;
  r.seconds_total = history.seconds_total;
  r.skipped_singular = history.skipped_singular;
  return r;
}

ExperimentResult run_experiment(const Dataset& dataset, const ExperimentConfig& config) {
  config.validate();
  const std::size_t n = dataset.buildings.size();
  std::vector<std::optional<BuildingEval>> evals(n);
  std::vector<std::vector<TimingRow>> timings(n);
  std::vector<std::string> errors(n);
  for_each_index(n, config.jobs, [&](std::size_t i) {
    try {
      const BuildingData data = prepare_building(dataset, i, config);
      std::map<std::string, std::vector<Day>> fc;
      fc[kNaive] = naive_forecasts(data.test);
      const TrainResult mse = train_regime(data, Regime::MSE, config);
      fc[kLstm] = predict_all(mse.model, data.test);
      const TrainResult dfl = train_regime(data, Regime::DFL, config);
      fc[kDfl] = predict_all(dfl.model, data.test);
      const TrainResult ws = train_regime(data, Regime::DFL_WS, config, &mse.model);
      fc[kDflWs] = predict_all(ws.model, data.test);
      timings[i] = {timing_row(data.id, Regime::MSE, mse.history), timing_row(data.id, Regime::DFL, dfl.history),
                    timing_row(data.id, Regime::DFL_WS, ws.history)};
      evals[i] = evaluate_building(data.id, data.test, fc);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  ExperimentResult out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      out.failures.push_back({dataset.buildings[i].id, errors[i]});
      continue;
    }
    out.report.per_building[evals[i]->id] = std::move(*evals[i]);
    out.report.timing.insert(out.report.timing.end(), timings[i].begin(), timings[i].end());
  }
  if (!out.report.per_building.empty()) finalize_report(out.report);
  return out;
}

}  // namespace pvdfl
