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

// JSON mapping of the configuration structs. Reading merges: keys that are
// absent keep the current value, unknown keys are rejected.

#include <json.hpp>

#include "experiment.hpp"

namespace pvdfl {

nlohmann::json to_json(const LstmHyper& h);
nlohmann::json to_json(const NoiseSpec& s);
nlohmann::json to_json(const TariffConfig& t);
nlohmann::json to_json(const DatasetConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);
nlohmann::json to_json(const TrainHistory& h);

void merge(LstmHyper& h, const nlohmann::json& j);
void merge(NoiseSpec& s, const nlohmann::json& j);
void merge(TariffConfig& t, const nlohmann::json& j);
void merge(DatasetConfig& c, const nlohmann::json& j);
void merge(ExperimentConfig& c, const nlohmann::json& j);
TrainHistory history_from_json(const nlohmann::json& j);

/// Parses text as a JSON object; ParseError with `source` on failure.
nlohmann::json parse_json_object(const std::string& text, const std::string& source);

}  // namespace pvdfl
