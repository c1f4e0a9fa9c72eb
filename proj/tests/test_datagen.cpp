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

#include <numeric>
#include <random>

#include "common.hpp"
#include "datagen.hpp"

using namespace pvdfl;
using testing::code_of;

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean_of(a), mb = mean_of(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double load_mape_at(int level) {
  const Building b = synth_household(3, 1);
  NoiseSpec s = noise_level_to_spec(level, NoiseSpec::load_default());
  s.seed = 99;
  const HourlySeries f = apply_forecast_noise(b.load_series, s);
  return mape(f.values, b.load_series.values);
}

}  // namespace

TEST_CASE("skew-normal means") {
  std::mt19937_64 rng(1);
  double s0 = 0.0, s1 = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) s0 += skew_normal_sample(0.0, rng);
  for (int i = 0; i < n; ++i) s1 += skew_normal_sample(-1.0, rng);
  CHECK(std::abs(s0 / n) <= 0.005);
  // mean of SN(alpha) is sqrt(2/pi) * alpha / sqrt(1 + alpha^2)
  CHECK(std::abs(s1 / n - (-std::sqrt(2.0 / 3.14159265358979) / std::sqrt(2.0))) <= 0.01);

  std::mt19937_64 a(5), b(5);
  for (int i = 0; i < 10; ++i) CHECK(skew_normal_sample(-0.5, a) == skew_normal_sample(-0.5, b));
}

TEST_CASE("zero noise is the identity") {
  const Building b = synth_household(2, 1);
  NoiseSpec s;
  s.alpha = -1.0;
  s.seed = 3;
  CHECK(apply_forecast_noise(b.load_series, s).values == b.load_series.values);
  const NoiseSpec level0 = noise_level_to_spec(0, NoiseSpec::load_default());
  CHECK(level0.beta == 0.0);
  CHECK(level0.shift_prob == 0.0);
  CHECK(level0.smooth_sigma == 0.0);
  CHECK(apply_forecast_noise(b.load_series, level0).values == b.load_series.values);
}

TEST_CASE("noise is deterministic and bounded") {
  const Building b = synth_household(2, 1);
  NoiseSpec s = NoiseSpec::load_default();
  s.seed = 17;
  const HourlySeries f1 = apply_forecast_noise(b.load_series, s);
  const HourlySeries f2 = apply_forecast_noise(b.load_series, s);
  CHECK(f1.values == f2.values);
  const double mx = *std::max_element(b.load_series.values.begin(), b.load_series.values.end());
  for (double v : f1.values) {
    CHECK(v >= 0.0);
    CHECK(v <= mx + 1e-12);
  }
  s.seed = 18;
  CHECK(apply_forecast_noise(b.load_series, s).values != f1.values);
}

TEST_CASE("noise levels scale beta") {
  const NoiseSpec base = NoiseSpec::load_default();
  CHECK(noise_level_to_spec(2, base).beta == doctest::Approx(0.5));
  CHECK(noise_level_to_spec(6, base).beta == doctest::Approx(1.5));
  CHECK(noise_level_to_spec(2, base).shift_prob == base.shift_prob);
  CHECK(code_of([&] { noise_level_to_spec(7, base); }) == ErrorCode::PreconditionViolated);
}

TEST_CASE("DNI forecast error lies in the target band") {
  const Weather w = synth_weather(7, 1);
  NoiseSpec s = NoiseSpec::dni_default();
  s.seed = 4;
  const HourlySeries f = apply_forecast_noise(w.dni, s);
  double se = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) se += (f.values[i] - w.dni.values[i]) * (f.values[i] - w.dni.values[i]);
  const double mx = *std::max_element(w.dni.values.begin(), w.dni.values.end());
  const double nrmse = std::sqrt(se / f.size()) / mx;
  CHECK(nrmse >= 0.07);
  CHECK(nrmse <= 0.13);
}

TEST_CASE("level-2 load forecast MAPE lies in the band") {
  const double m = load_mape_at(2);
  CHECK(m >= 25.0);
  CHECK(m <= 50.0);
}

TEST_CASE("level-6 load forecast MAPE lies in the band" * doctest::may_fail()) {
  const double m = load_mape_at(6);
  CHECK(m >= 100.0);
  CHECK(m <= 160.0);
}

TEST_CASE("tariff") {
  SUBCASE("flat without amplitudes") {
    TariffConfig c;
    c.daily_amplitude = c.weekly_amplitude = c.trend_per_year = c.noise_std = 0.0;
    const auto [im, ex] = generate_tariff(c, 48);
    for (std::size_t i = 0; i < 48; ++i) {
      CHECK(im.values[i] == doctest::Approx(c.base_level + c.offtake_tax));
      CHECK(ex.values[i] == doctest::Approx(c.base_level * c.export_discount_frac));
    }
  }
  SUBCASE("default config rises and never inverts") {
    TariffConfig c;
    c.seed = 3;
    const std::size_t hours = 3 * 365 * 24;
    const auto [im, ex] = generate_tariff(c, hours);
    for (std::size_t i = 0; i < hours; ++i) CHECK(im.values[i] >= ex.values[i]);
    const std::size_t seg = hours / 6;
    const std::vector<double> first(im.values.begin(), im.values.begin() + seg);
    const std::vector<double> last(im.values.end() - seg, im.values.end());
    CHECK(mean_of(last) > mean_of(first));
    const auto again = generate_tariff(c, hours);
    CHECK(again.first.values == im.values);
  }
  SUBCASE("partial days are rejected") {
    CHECK(code_of([] { generate_tariff(TariffConfig{}, 30); }) == ErrorCode::PreconditionViolated);
  }
}

TEST_CASE("battery sizing") {
  const BatterySpec b = size_battery(5.0);
  CHECK(b.capacity_kwh == doctest::Approx(5.5));
  CHECK(b.max_power() == doctest::Approx(2.037).epsilon(1e-3));
  CHECK(size_battery(8.0).capacity_kwh == doctest::Approx(8.8));
  CHECK(code_of([] { size_battery(0.0); }) == ErrorCode::PreconditionViolated);
}

TEST_CASE("synthetic households") {
  const Weather w = synth_weather(7, 1);
  const Building a = synth_household(1, 1, w);
  const Building b = synth_household(2, 1, w);
  for (std::size_t h = 0; h < a.pv_series.size(); ++h) {
    const int hod = static_cast<int>((a.pv_series.start_hour + static_cast<std::int64_t>(h)) % 24);
    if (hod < 3 || hod > 22) CHECK(a.pv_series.values[h] == 0.0);
  }
  const double pv_mwh = std::accumulate(a.pv_series.values.begin(), a.pv_series.values.end(), 0.0) / 1000.0;
  CHECK(pv_mwh >= 4.5);
  CHECK(pv_mwh <= 7.5);
  CHECK(a.yearly_load_mwh >= 3.5);
  CHECK(a.yearly_load_mwh <= 8.0);
  CHECK(correlation(a.load_series.values, b.load_series.values) < 0.5);
  const Building again = synth_household(1, 1, w);
  CHECK(again.load_series.values == a.load_series.values);
}

TEST_CASE("load_buildings") {
  testing::TempDir dir("bld");
  const Building a = synth_household(1, 1), b = synth_household(2, 1);
  write_building_csv(dir.path / "b01.csv", a);
  write_building_csv(dir.path / "b02.csv", b);
  const std::vector<Building> got = load_buildings(dir.path);
  REQUIRE(got.size() == 2);
  CHECK(got[0].id == "b01");
  CHECK(got[1].id == "b02");
  CHECK(got[0].load_series.values == a.load_series.values);
  CHECK(got[1].pv_series.values == b.pv_series.values);
  CHECK(got[0].battery.capacity_kwh == doctest::Approx(a.battery.capacity_kwh).epsilon(1e-12));

  {
    std::ofstream f(dir.path / "b03.csv");
    f << "hour,load_kwh,pv_kwh\n0,1.0,-1.0\n";
  }
  CHECK(code_of([&] { load_buildings(dir.path); }) == ErrorCode::SchemaError);
}
