// Copyright 2026 The mlforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MLFORGE_RUN_CONFIG_H_
#define MLFORGE_RUN_CONFIG_H_

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mlforge/imbalance.h"
#include "mlforge/trainer.h"

namespace mlforge {

// Flat key=value run configuration. Recognized keys:
//   schedule: ref_lr ref_batch batch warmup_epochs warmup_start warmup_factor
//             decay_factor decay_every_epochs max_epochs policy(step|poly)
//             poly_power steps_per_epoch group.<name>=<multiplier>
//   loss:     eta neg_ratio skip_prob clamp_eps
//   optimizer: momentum weight_decay
//   model:    hidden (comma list of widths) groups (comma list, one per stage)
// BatchNorm (decay 0.9, eps 0.001 at full scale) has no counterpart in the
// desk-scale model, so it has no keys.
struct RunConfig {
  ScheduleConfig schedule;
  LossConfig loss;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<std::size_t> hidden{16};
  std::vector<std::string> groups;

  void Validate() const;
};

// Unknown keys and malformed values are errors. Lines starting with '#' and
// blank lines are ignored.
RunConfig ParseRunConfig(std::istream& in);
RunConfig ReadRunConfig(const std::filesystem::path& path);
void WriteRunConfig(const RunConfig& config, std::ostream& out);

}  // namespace mlforge

#endif  // MLFORGE_RUN_CONFIG_H_
