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

#include "mlforge/distsim.h"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include "mlforge/error.h"
#include "mlforge/text.h"

namespace mlforge {
namespace {

// Runs body(worker) for every worker, either in a loop or one thread each.
void ForEachWorker(std::size_t k, Execution execution,
                   const std::function<void(std::size_t)>& body) {
  if (execution == Execution::kSequential || k == 1) {
    for (std::size_t w = 0; w < k; ++w) body(w);
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(k);
  for (std::size_t w = 0; w < k; ++w) threads.emplace_back(body, w);
}

struct Message {
  ChunkRange range;
  std::vector<double> payload;
};

}  // namespace

ChunkRange RingChunk(std::size_t d, std::size_t k, std::size_t c) {
  const std::size_t size = (d + k - 1) / k;
  const std::size_t begin = std::min(d, c * size);
  return {begin, std::min(d, begin + size)};
}

RingStats RingAllReduce(std::vector<std::vector<double>>& buffers,
                        Execution execution) {
  const std::size_t k = buffers.size();
  if (k == 0) throw UsageError("distsim", "empty-group", "all-reduce needs a worker");
  const std::size_t d = buffers.front().size();
  for (const auto& b : buffers) {
    if (b.size() != d) {
      throw UsageError("distsim", "length-mismatch", "all-reduce buffers differ in length");
    }
  }
  RingStats stats;
  stats.elements_sent.assign(k, 0);
  if (k == 1) return stats;

  // inbox[r] holds the message worker r receives in the current step.
  std::vector<Message> inbox(k);
  auto chunk_for = [k](std::size_t r, std::size_t s, bool reduce_phase) {
    // (r - s - 1) mod k while reducing, (r - s) mod k while gathering.
    const std::size_t back = (s + (reduce_phase ? 1 : 0)) % k;
    return (r + k - back) % k;
  };
  auto send = [&](std::size_t r, std::size_t s, bool reduce_phase) {
    const ChunkRange range = RingChunk(d, k, chunk_for(r, s, reduce_phase));
    Message& m = inbox[(r + 1) % k];
    m.range = range;
    m.payload.assign(buffers[r].begin() + static_cast<std::ptrdiff_t>(range.begin),
                     buffers[r].begin() + static_cast<std::ptrdiff_t>(range.end));
    stats.elements_sent[r] += range.end - range.begin;
  };
  auto receive = [&](std::size_t r, bool reduce_phase) {
    const Message& m = inbox[r];
    double* dst = buffers[r].data() + m.range.begin;
    for (std::size_t i = 0; i < m.payload.size(); ++i) {
      dst[i] = reduce_phase ? m.payload[i] + dst[i] : m.payload[i];
    }
  };

  const std::size_t steps = k - 1;
  if (execution == Execution::kSequential) {
    for (bool reduce_phase : {true, false}) {
      for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t r = 0; r < k; ++r) send(r, s, reduce_phase);
        for (std::size_t r = 0; r < k; ++r) receive(r, reduce_phase);
      }
    }
  } else {
    // Two barriers per step separate the send and receive phases.
    std::barrier sync(static_cast<std::ptrdiff_t>(k));
    ForEachWorker(k, Execution::kThreaded, [&](std::size_t r) {
      for (bool reduce_phase : {true, false}) {
        for (std::size_t s = 0; s < steps; ++s) {
          send(r, s, reduce_phase);
          sync.arrive_and_wait();
          receive(r, reduce_phase);
          sync.arrive_and_wait();
        }
      }
    });
  }
  stats.steps = 2 * steps;
  return stats;
}

bool WorkerGroup::ReplicasIdentical() const {
  if (replicas.empty()) return true;
  const auto ref = replicas.front().FlatParameters();
  for (std::size_t w = 1; w < replicas.size(); ++w) {
    const auto other = replicas[w].FlatParameters();
    if (other.size() != ref.size() ||
        std::memcmp(other.data(), ref.data(), ref.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

double WorkerGroup::MaxDivergence() const {
  if (replicas.empty()) return 0.0;
  const auto ref = replicas.front().FlatParameters();
  double worst = 0.0;
  for (std::size_t w = 1; w < replicas.size(); ++w) {
    const auto other = replicas[w].FlatParameters();
    for (std::size_t i = 0; i < ref.size(); ++i) {
      worst = std::max(worst, std::abs(other[i] - ref[i]));
    }
  }
  return worst;
}

WorkerGroup MakeWorkerGroup(const Model& prototype, std::size_t k) {
  if (k == 0) throw UsageError("distsim", "empty-group", "worker count must be positive");
  WorkerGroup group;
  group.replicas.assign(k, prototype);
  return group;
}

void Broadcast(std::span<const double> params, WorkerGroup& group) {
  if (group.replicas.empty()) return;
  group.replicas[0].SetFlatParameters(params);
  for (std::size_t w = 1; w < group.size(); ++w) {
    const auto upstream = group.replicas[w - 1].FlatParameters();
    group.replicas[w].SetFlatParameters(upstream);
  }
}

std::vector<std::vector<std::size_t>> ShardBatch(std::size_t n, std::size_t k) {
  if (k == 0) throw UsageError("distsim", "empty-group", "worker count must be positive");
  std::vector<std::vector<std::size_t>> shards(k);
  std::size_t offset = 0;
  for (std::size_t w = 0; w < k; ++w) {
    const std::size_t size = n / k + (w < n % k ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) shards[w].push_back(offset + i);
    offset += size;
  }
  return shards;
}

void ValidateShards(const std::vector<std::vector<std::size_t>>& shards,
                    std::size_t n) {
  std::vector<char> seen(n, 0);
  std::size_t smallest = n, largest = 0, total = 0;
  for (const auto& shard : shards) {
    smallest = std::min(smallest, shard.size());
    largest = std::max(largest, shard.size());
    total += shard.size();
    for (std::size_t idx : shard) {
      if (idx >= n || seen[idx]) {
        throw DataError("distsim", "shard-overlap", "record " + std::to_string(idx) +
                                                         " is out of range or in two shards");
      }
      seen[idx] = 1;
    }
  }
  if (total != n) throw DataError("distsim", "shard-coverage", "shards do not cover the dataset");
  if (!shards.empty() && largest > smallest + 1) {
    throw DataError("distsim", "shard-imbalance",
                    "shard sizes range from " + std::to_string(smallest) + " to " +
                        std::to_string(largest));
  }
}

ParallelResult ParallelTrain(const Model& init, const TrainingData& data,
                             const ParallelConfig& config, const LossConfig& loss,
                             ScheduleConfig schedule) {
  const std::size_t k = config.workers;
  const std::size_t b = config.per_worker_batch;
  if (k == 0 || b == 0) {
    throw UsageError("distsim", "config", "workers and batch must be positive");
  }
  if (data.features.rows() != data.labels.rows()) {
    throw UsageError("distsim", "shape", "feature and label row counts differ");
  }
  schedule.batch = k * b;
  schedule.Validate();
  loss.Validate();

  WorkerGroup group = MakeWorkerGroup(init, k);
  Broadcast(init.FlatParameters(), group);
  std::vector<OptimizerState> opts(
      k, OptimizerState::For(init, config.momentum, config.weight_decay));
  AdaptiveWeightState adaptive(init.output_dim());
  BatchSampler sampler(static_cast<std::size_t>(data.features.rows()), k * b,
                       Rng::Stream(config.seed, "trainer.batches"));
  Rng mask_rng = Rng::Stream(config.seed, "trainer.downsample");
  const auto shards = ShardBatch(k * b, k);
  ValidateShards(shards, k * b);

  ParallelResult result;
  std::vector<std::vector<double>> buffers(k);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto start = std::chrono::steady_clock::now();
    const auto rows = sampler.Next();
    const Matrix global_features = GatherRows(data.features, rows);
    const BinaryMatrix global_labels = GatherRows(data.labels, rows);
    const BatchPlan plan = PlanBatch(global_labels, loss, adaptive, mask_rng);

    ForEachWorker(k, config.execution, [&](std::size_t w) {
      const auto offset = static_cast<Eigen::Index>(shards[w].front());
      const auto count = static_cast<Eigen::Index>(shards[w].size());
      const BatchPlan local{plan.mask.middleRows(offset, count),
                            plan.weights.middleRows(offset, count)};
      GradientSum sum = AccumulateMultiLabel(
          group.replicas[w], global_features.middleRows(offset, count),
          global_labels.middleRows(offset, count), local, loss);
      buffers[w] = sum.grads.Flatten();
      buffers[w].push_back(sum.loss_sum);
      buffers[w].push_back(static_cast<double>(sum.active));
    });

    RingAllReduce(buffers, config.execution);

    std::vector<double> losses(k);
    ForEachWorker(k, config.execution, [&](std::size_t w) {
      const std::vector<double>& flat = buffers[w];
      GradientSum sum;
      sum.grads = Gradients::ZerosLike(group.replicas[w]);
      sum.grads.Unflatten(std::span<const double>(flat.data(), flat.size() - 2));
      sum.loss_sum = flat[flat.size() - 2];
      sum.active = static_cast<std::size_t>(flat.back());
      const std::size_t active = sum.active;
      losses[w] = FinishStep(group.replicas[w], std::move(sum), active, opts[w], schedule);
    });
    result.losses.push_back(losses[0]);
    result.divergence.push_back({step, group.MaxDivergence()});
    if (config.check_replicas && !group.ReplicasIdentical()) {
      throw NumericalError("distsim", "replica-divergence",
                           "replicas differ after step " + std::to_string(step) +
                               " (max abs " + FormatShortest(result.divergence.back().max_abs) +
                               ")");
    }
    result.step_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  result.model = group.replicas[0];
  result.optimizer = opts[0];
  result.adaptive = adaptive;
  return result;
}

ScalingReport BuildScalingReport(const std::map<std::size_t, double>& step_seconds,
                                 std::size_t per_worker_batch) {
  auto base = step_seconds.find(1);
  if (base == step_seconds.end()) {
    throw DataError("distsim", "missing-baseline", "scaling report needs a 1-worker timing");
  }
  ScalingReport report;
  const double b = static_cast<double>(per_worker_batch);
  const double base_throughput = b / base->second;
  for (const auto& [k, seconds] : step_seconds) {
    if (k == 0 || !(seconds > 0.0)) {
      throw DataError("distsim", "timing", "timings need positive worker counts and durations");
    }
    ScalingPoint p;
    p.workers = k;
    p.step_seconds = seconds;
    p.images_per_second = static_cast<double>(k) * b / seconds;
    p.efficiency = p.images_per_second / (static_cast<double>(k) * base_throughput);
    report.points.push_back(p);
  }
  return report;
}

std::string RenderScalingCsv(const ScalingReport& report) {
  std::ostringstream out;
  out << "workers,step_seconds,images_per_second,efficiency\n";
  for (const ScalingPoint& p : report.points) {
    out << p.workers << ',' << FormatShortest(p.step_seconds) << ','
        << FormatFixed(p.images_per_second, 2) << ',' << FormatFixed(p.efficiency, 4) << '\n';
  }
  return out.str();
}

std::map<std::size_t, double> ParseTimings(std::istream& in) {
  std::map<std::size_t, double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = Trim(line);
    if (view.empty() || view.front() == '#' || view.starts_with("workers")) continue;
    const auto f = SplitString(view, ',');
    auto k = f.size() == 2 ? ParseUnsigned<std::size_t>(Trim(f[0])) : std::nullopt;
    auto t = f.size() == 2 ? ParseReal(Trim(f[1])) : std::nullopt;
    if (!k || !t) {
      throw DataError("distsim", "parse",
                      "line " + std::to_string(line_no) + ": expected 'workers,step_seconds'");
    }
    out[*k] = *t;
  }
  return out;
}

}  // namespace mlforge
