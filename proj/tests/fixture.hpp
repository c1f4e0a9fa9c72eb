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

// A one-year, two-building dataset and a tiny LSTM, shared by the slower
// training and evaluation tests.

#include "experiment.hpp"

namespace testing {

inline const pvdfl::Dataset& small_dataset() {
  static const pvdfl::Dataset ds = [] {
    pvdfl::DatasetConfig c;
    c.buildings = 2;
    c.years = 1;
    c.seed = 11;
    return pvdfl::generate_dataset(c);
  }();
  return ds;
}

inline pvdfl::ExperimentConfig tiny_config(int max_epochs = 3) {
  pvdfl::ExperimentConfig c;
  c.hyper.layers = 1;
  c.hyper.hidden_size = 6;
  c.hyper.dropout_frac = 0.0;
  c.hyper.learning_rate = 3e-3;
  c.hyper.batch_size = 32;
  c.max_epochs = max_epochs;
  c.patience = max_epochs - 1;
  c.seed = 5;
  return c;
}

inline const pvdfl::BuildingData& small_building() {
  static const pvdfl::BuildingData bd = pvdfl::prepare_building(small_dataset(), 0, tiny_config());
  return bd;
}

}  // namespace testing
