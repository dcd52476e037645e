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

#ifndef MLFORGE_DISTSIM_H_
#define MLFORGE_DISTSIM_H_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mlforge/imbalance.h"
#include "mlforge/trainer.h"

namespace mlforge {

// How logical workers are executed. Both modes perform the same arithmetic
// in the same order and give bit-identical results.
enum class Execution { kSequential, kThreaded };

// Half-open element range of chunk `c` when a length-d buffer is split into
// k chunks of ceil(d/k) elements. Trailing chunks may be short or empty.
struct ChunkRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};
ChunkRange RingChunk(std::size_t d, std::size_t k, std::size_t c);

struct RingStats {
  std::size_t steps = 0;                  // 2 (k - 1)
  std::vector<std::size_t> elements_sent;  // per worker
};

// Two-phase ring all-reduce over k equal-length buffers, in place.
//   scatter-reduce: at step s (0..k-2) worker r sends chunk (r - s - 1) mod k
//     to worker r + 1, which stores incoming + local. Chunk c finishes on
//     worker c holding v[c+1] + v[c+2] + ... + v[c+k], summed left to right
//     with indices mod k.
//   all-gather: at step s worker r forwards chunk (r - s) mod k to r + 1.
// Afterwards every buffer holds the same elementwise sum.
RingStats RingAllReduce(std::vector<std::vector<double>>& buffers,
                        Execution execution = Execution::kSequential);

// k model replicas with ring order 0..k-1.
struct WorkerGroup {
  std::vector<Model> replicas;

  std::size_t size() const { return replicas.size(); }
  // True when every replica's parameters equal replica 0 bit for bit.
  bool ReplicasIdentical() const;
  // Largest absolute parameter difference from replica 0.
  double MaxDivergence() const;
};

WorkerGroup MakeWorkerGroup(const Model& prototype, std::size_t k);

// Passes `params` around the ring from worker 0 so every replica ends with
// a bit-identical copy.
void Broadcast(std::span<const double> params, WorkerGroup& group);

// Splits positions 0..n-1 into k contiguous shards whose sizes differ by at
// most one; worker w takes shard w.
std::vector<std::vector<std::size_t>> ShardBatch(std::size_t n, std::size_t k);
// Throws unless the shards are disjoint, cover 0..n-1 and differ in size
// by at most one record.
void ValidateShards(const std::vector<std::vector<std::size_t>>& shards,
                    std::size_t n);

struct ParallelConfig {
  std::size_t workers = 1;
  std::size_t per_worker_batch = 1;
  std::size_t steps = 1;
  std::uint64_t seed = 0;
  Execution execution = Execution::kSequential;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  // Throw as soon as any replica differs from replica 0.
  bool check_replicas = true;
};

struct DivergenceRecord {
  std::size_t step = 0;
  double max_abs = 0.0;
};

struct ParallelResult {
  Model model;  // replica 0
  OptimizerState optimizer;
  AdaptiveWeightState adaptive;
  std::vector<double> losses;
  std::vector<DivergenceRecord> divergence;  // one entry per step
  std::vector<double> step_seconds;          // wall clock
};

// Synchronous data-parallel SGD. The global batch of k * b rows is drawn
// with the same streams Train uses, so the global sample order does not
// depend on k. Each step the global batch labels fix the down-sampling mask
// and adaptive weights, worker w accumulates summed gradients over shard w,
// the sums (plus loss sum and active count) are ring-all-reduced and divided
// once, and every replica applies the same update. The schedule's batch is
// set to k * b.
ParallelResult ParallelTrain(const Model& init, const TrainingData& data,
                             const ParallelConfig& config, const LossConfig& loss,
                             ScheduleConfig schedule);

struct ScalingPoint {
  std::size_t workers = 0;
  double step_seconds = 0.0;
  double images_per_second = 0.0;
  double efficiency = 0.0;  // throughput(k) / (k * throughput(1))
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
};

// `step_seconds` maps worker count to seconds per synchronous step with
// `per_worker_batch` images per worker. Requires a k = 1 entry.
ScalingReport BuildScalingReport(const std::map<std::size_t, double>& step_seconds,
                                 std::size_t per_worker_batch);
std::string RenderScalingCsv(const ScalingReport& report);
// CSV with header "workers,step_seconds".
std::map<std::size_t, double> ParseTimings(std::istream& in);

}  // namespace mlforge

#endif  // MLFORGE_DISTSIM_H_
