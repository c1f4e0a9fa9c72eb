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

#pragma once

// File-based commands behind the CLI. Each takes a JSON option object,
// writes its outputs plus a manifest, and returns a JSON summary.

#include <string>

#include <json.hpp>

namespace pvdfl {

struct CommandOutcome {
  nlohmann::json summary;
  int failed_buildings = 0;
};

/// gen:    {out, buildings, years, seed, load_noise_level, dni_noise, load_noise, tariff, start_hour}
/// train:  {data, out, regime, init?, buildings?, experiment config keys}
/// eval:   {data, run, out?, buildings?, regimes?}
/// sweep:  {data, run, out?, levels?, regimes?, buildings?, experiment config keys}
/// report: {dir}
/// Every command also accepts "argv" (recorded verbatim in the manifest).
CommandOutcome run_command(const std::string& command, const nlohmann::json& options);

}  // namespace pvdfl
