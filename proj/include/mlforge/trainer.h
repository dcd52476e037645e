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

#ifndef MLFORGE_TRAINER_H_
#define MLFORGE_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mlforge/imbalance.h"
#include "mlforge/matrix.h"
#include "mlforge/rng.h"

namespace mlforge {

enum class Activation { kTanh, kIdentity };
enum class HeadKind { kSigmoid, kSoftmax };

// Dense affine map followed by an elementwise nonlinearity. The final stage
// of a model always uses kIdentity: its outputs are logits, and the head
// (sigmoid or softmax) turns them into probabilities.
struct Stage {
  std::string group;
  Activation activation = Activation::kTanh;
  Matrix weight;  // out x in
  Vector bias;    // out

  std::size_t input_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(weight.size() + bias.size());
  }

  friend bool operator==(const Stage& a, const Stage& b) {
    return a.group == b.group && a.activation == b.activation &&
           a.weight.rows() == b.weight.rows() && a.weight.cols() == b.weight.cols() &&
           a.weight == b.weight && a.bias.size() == b.bias.size() && a.bias == b.bias;
  }
};

struct ModelSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;  // one tanh stage per entry
  std::size_t output_dim = 0;
  HeadKind head = HeadKind::kSigmoid;
  // Group name per stage (hidden.size() + 1 entries). Empty means "bottom"
  // for every hidden stage and "top" for the output stage.
  std::vector<std::string> groups;
};

class Model {
 public:
  Model() = default;
  Model(std::vector<Stage> stages, HeadKind head);

  // Weights ~ N(0, 1/fan_in), biases zero.
  static Model Initialize(const ModelSpec& spec, Rng& rng);

  const std::vector<Stage>& stages() const { return stages_; }
  std::vector<Stage>& mutable_stages() { return stages_; }
  HeadKind head() const { return head_; }
  std::size_t input_dim() const { return stages_.front().input_dim(); }
  std::size_t output_dim() const { return stages_.back().output_dim(); }
  std::size_t parameter_count() const;

  // Flat view in stage order: weight (row-major) then bias, per stage.
  std::vector<double> FlatParameters() const;
  void SetFlatParameters(std::span<const double> flat);
  bool AllFinite() const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  std::vector<Stage> stages_;
  HeadKind head_ = HeadKind::kSigmoid;
};

struct ForwardPass {
  std::vector<Matrix> inputs;  // inputs[s] feeds stage s
  Matrix logits;
  Matrix probs;  // sigmoid or row-softmax of logits
};

ForwardPass Forward(const Model& model, const Matrix& features);
Matrix Predict(const Model& model, const Matrix& features);

// Gradients shaped like the model's parameters.
struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  static Gradients ZerosLike(const Model& model);
  std::vector<double> Flatten() const;
  void Unflatten(std::span<const double> flat);
  Gradients& operator*=(double s);
};

Gradients Backward(const Model& model, const ForwardPass& pass,
                   const Matrix& grad_logits);

struct OptimizerState {
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  Gradients velocity;

  static OptimizerState For(const Model& model, double momentum = 0.9,
                            double weight_decay = 1e-4);
};

enum class LrPolicy { kStep, kPoly };

struct ScheduleConfig {
  double ref_lr = 0.01;
  double ref_batch = 512;
  std::size_t batch = 4096;
  double warmup_epochs = 8;
  double warmup_start = 0.01;
  double warmup_factor = 1.297;
  double decay_factor = 0.1;
  double decay_every_epochs = 25;
  double max_epochs = 60;
  LrPolicy policy = LrPolicy::kStep;
  double poly_power = 0.9;
  std::map<std::string, double> group_multipliers{{"bottom", 1.0}, {"top", 1.0}};
  // Optimizer steps per epoch; converts the step counter into an epoch.
  std::size_t steps_per_epoch = 1;

  void Validate() const;
};

// Linear scaling: ref_lr * batch / ref_batch.
double BaseLr(const ScheduleConfig& config);

// warmup_start * warmup_factor^floor(epoch); the ramp LrAt follows before
// warmup_epochs. At epoch = warmup_epochs it gives the value the ramp
// reaches as the main schedule takes over.
double WarmupLr(double epoch, const ScheduleConfig& config);

// Warm-up multiplies warmup_start by warmup_factor once per completed epoch.
// Afterwards the step policy decays by decay_factor every decay_every_epochs
// counted from the end of warm-up; the poly policy anneals base_lr to zero
// at max_epochs.
double LrAt(double epoch, const ScheduleConfig& config);

// lr scaled by the group's multiplier.
double GroupLr(const std::string& group, double lr, const ScheduleConfig& config);

// Mask and per-entry weights for one multi-label mini-batch. Advances the
// adaptive state and consumes `rng` for down-sampling.
struct BatchPlan {
  BinaryMatrix mask;
  Matrix weights;
};

BatchPlan PlanBatch(const BinaryMatrix& labels, const LossConfig& loss,
                    AdaptiveWeightState& adaptive, Rng& rng);

// Unnormalized gradients of the summed loss over a block of rows.
struct GradientSum {
  Gradients grads;
  double loss_sum = 0.0;
  std::size_t active = 0;
};

GradientSum AccumulateMultiLabel(const Model& model, const Matrix& features,
                                 const BinaryMatrix& labels, const BatchPlan& plan,
                                 const LossConfig& loss);

// Mean softmax cross-entropy over rows; `classes[i]` indexes the true column.
GradientSum AccumulateSoftmax(const Model& model, const Matrix& features,
                              std::span<const std::size_t> classes);

// Learning rate for the optimizer's current step.
double CurrentLr(const OptimizerState& opt, const ScheduleConfig& config);

// Per group: v <- mu * v + (g + wd * w); w <- w - group_lr * v.
void ApplyUpdate(Model& model, const Gradients& grads, OptimizerState& opt,
                 double lr, const ScheduleConfig& config);

// Divides by the accumulated count, checks for non-finite values, applies
// the update at CurrentLr and advances the step counter. Returns the mean
// loss. `count` is the normalizer (active entries or rows).
double FinishStep(Model& model, GradientSum sum, std::size_t count,
                  OptimizerState& opt, const ScheduleConfig& config);

// One multi-label SGD step: forward, down-sample, adaptive weights, weighted
// cross entropy, backprop, momentum update.
double TrainStep(Model& model, const Matrix& features, const BinaryMatrix& labels,
                 OptimizerState& opt, const LossConfig& loss,
                 const ScheduleConfig& schedule, AdaptiveWeightState& adaptive,
                 Rng& rng);

// Deterministic mini-batch order: reshuffles the index set every pass.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, Rng rng);
  std::vector<std::size_t> Next();

 private:
  std::size_t n_;
  std::size_t batch_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

Matrix GatherRows(const Matrix& m, std::span<const std::size_t> rows);
BinaryMatrix GatherRows(const BinaryMatrix& m, std::span<const std::size_t> rows);

struct TrainingData {
  Matrix features;
  BinaryMatrix labels;               // multi-label targets
  std::vector<std::size_t> classes;  // single-label targets (softmax head)
};

struct TrainHistory {
  std::vector<double> losses;
};

// `steps` multi-label steps with batches drawn by a BatchSampler seeded from
// `seed`. Uses and updates `opt` and `adaptive`.
TrainHistory Train(Model& model, const TrainingData& data, std::size_t steps,
                   std::uint64_t seed, OptimizerState& opt, const LossConfig& loss,
                   const ScheduleConfig& schedule, AdaptiveWeightState& adaptive);

// Keeps every stage but the last and re-initializes a new output stage with
// `new_head_dim` outputs.
Model ReplaceHead(const Model& pretrained, std::size_t new_head_dim,
                  HeadKind head, Rng& rng);

struct FineTuneResult {
  Model model;
  TrainHistory history;
};

// Replaces the head and trains for `steps` steps with per-group learning
// rates. A softmax head trains on data.classes, a sigmoid head on
// data.labels.
FineTuneResult FineTune(const Model& pretrained, std::size_t new_head_dim,
                        HeadKind head, const TrainingData& data, std::size_t steps,
                        std::uint64_t seed, const LossConfig& loss,
                        const ScheduleConfig& schedule, double momentum = 0.9,
                        double weight_decay = 1e-4);

}  // namespace mlforge

#endif  // MLFORGE_TRAINER_H_
