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

#ifndef MLFORGE_CHECKPOINT_H_
#define MLFORGE_CHECKPOINT_H_

#include <filesystem>
#include <istream>
#include <ostream>
#include <vector>

#include "mlforge/imbalance.h"
#include "mlforge/taxonomy.h"
#include "mlforge/trainer.h"

namespace mlforge {

// Everything needed to resume or evaluate a run. `columns` maps output
// column index to category id.
struct Checkpoint {
  Model model;
  OptimizerState optimizer;
  AdaptiveWeightState adaptive;
  std::vector<CatId> columns;
};

inline constexpr int kCheckpointVersion = 1;

// Text format with shortest round-trip decimal values, so write followed by
// read reproduces every parameter bit for bit.
void WriteCheckpoint(const Checkpoint& ckpt, std::ostream& out);
void WriteCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint ParseCheckpoint(std::istream& in);
Checkpoint ReadCheckpoint(const std::filesystem::path& path);

}  // namespace mlforge

#endif  // MLFORGE_CHECKPOINT_H_
