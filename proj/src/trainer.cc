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

#include "mlforge/trainer.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mlforge/error.h"

namespace mlforge {
namespace {

Matrix Sigmoid(const Matrix& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Matrix RowSoftmax(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double max = z.row(i).maxCoeff();
    double total = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      out(i, j) = std::exp(z(i, j) - max);
      total += out(i, j);
    }
    out.row(i) /= total;
  }
  return out;
}

void CheckRows(const Matrix& features, Eigen::Index rows, const char* what) {
  if (features.rows() != rows) {
    throw UsageError("trainer", "shape",
                     std::string(what) + ": feature and label row counts differ");
  }
}

}  // namespace

Model::Model(std::vector<Stage> stages, HeadKind head)
    : stages_(std::move(stages)), head_(head) {
  if (stages_.empty()) throw UsageError("trainer", "model", "model needs a stage");
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const Stage& st = stages_[s];
    if (st.weight.rows() != st.bias.size() || st.weight.size() == 0) {
      throw UsageError("trainer", "model", "stage " + std::to_string(s) + " is malformed");
    }
    if (s > 0 && stages_[s - 1].output_dim() != st.input_dim()) {
      throw UsageError("trainer", "model",
                       "stage " + std::to_string(s) + " input does not match previous output");
    }
  }
  stages_.back().activation = Activation::kIdentity;
}

Model Model::Initialize(const ModelSpec& spec, Rng& rng) {
  if (spec.input_dim == 0 || spec.output_dim == 0) {
    throw UsageError("trainer", "model", "input and output dimensions must be positive");
  }
  std::vector<std::size_t> dims{spec.input_dim};
  dims.insert(dims.end(), spec.hidden.begin(), spec.hidden.end());
  dims.push_back(spec.output_dim);
  const std::size_t n_stages = dims.size() - 1;
  if (!spec.groups.empty() && spec.groups.size() != n_stages) {
    throw UsageError("trainer", "model",
                     "expected " + std::to_string(n_stages) + " group names");
  }
  std::vector<Stage> stages;
  for (std::size_t s = 0; s < n_stages; ++s) {
    if (dims[s + 1] == 0) throw UsageError("trainer", "model", "zero-width stage");
    Stage st;
    st.group = spec.groups.empty() ? (s + 1 == n_stages ? "top" : "bottom") : spec.groups[s];
    st.activation = s + 1 == n_stages ? Activation::kIdentity : Activation::kTanh;
    const auto out = static_cast<Eigen::Index>(dims[s + 1]);
    const auto in = static_cast<Eigen::Index>(dims[s]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    st.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) st.weight(r, c) = rng.Normal(0.0, scale);
    }
    st.bias = Vector::Zero(out);
    stages.push_back(std::move(st));
  }
  return Model(std::move(stages), spec.head);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Stage& s : stages_) n += s.parameter_count();
  return n;
}

std::vector<double> Model::FlatParameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const Stage& s : stages_) {
    flat.insert(flat.end(), s.weight.data(), s.weight.data() + s.weight.size());
    flat.insert(flat.end(), s.bias.data(), s.bias.data() + s.bias.size());
  }
  return flat;
}

void Model::SetFlatParameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) {
    throw UsageError("trainer", "shape", "flat parameter length mismatch");
  }
  std::size_t k = 0;
  for (Stage& s : stages_) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), s.weight.size(), s.weight.data());
    k += static_cast<std::size_t>(s.weight.size());
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), s.bias.size(), s.bias.data());
    k += static_cast<std::size_t>(s.bias.size());
  }
}

bool Model::AllFinite() const {
  return std::all_of(stages_.begin(), stages_.end(), [](const Stage& s) {
    return s.weight.allFinite() && s.bias.allFinite();
  });
}

ForwardPass Forward(const Model& model, const Matrix& features) {
  if (static_cast<std::size_t>(features.cols()) != model.input_dim()) {
    throw UsageError("trainer", "shape",
                     "features have " + std::to_string(features.cols()) +
                         " columns, model expects " + std::to_string(model.input_dim()));
  }
  ForwardPass pass;
  Matrix current = features;
  for (const Stage& s : model.stages()) {
    pass.inputs.push_back(current);
    Matrix z = current * s.weight.transpose();
    z.rowwise() += s.bias.transpose();
    if (s.activation == Activation::kTanh) z = z.array().tanh().matrix();
    current = std::move(z);
  }
  pass.logits = std::move(current);
  pass.probs = model.head() == HeadKind::kSigmoid ? Sigmoid(pass.logits)
                                                  : RowSoftmax(pass.logits);
  return pass;
}

Matrix Predict(const Model& model, const Matrix& features) {
  return Forward(model, features).probs;
}

Gradients Gradients::ZerosLike(const Model& model) {
  Gradients g;
  for (const Stage& s : model.stages()) {
    g.weight.push_back(Matrix::Zero(s.weight.rows(), s.weight.cols()));
    g.bias.push_back(Vector::Zero(s.bias.size()));
  }
  return g;
}

std::vector<double> Gradients::Flatten() const {
  std::vector<double> flat;
  for (std::size_t s = 0; s < weight.size(); ++s) {
    flat.insert(flat.end(), weight[s].data(), weight[s].data() + weight[s].size());
    flat.insert(flat.end(), bias[s].data(), bias[s].data() + bias[s].size());
  }
  return flat;
}

void Gradients::Unflatten(std::span<const double> flat) {
  std::size_t k = 0;
  for (std::size_t s = 0; s < weight.size(); ++s) {
    const auto nw = static_cast<std::size_t>(weight[s].size());
    const auto nb = static_cast<std::size_t>(bias[s].size());
    if (k + nw + nb > flat.size()) {
      throw UsageError("trainer", "shape", "flat gradient too short");
    }
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), nw, weight[s].data());
    k += nw;
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), nb, bias[s].data());
    k += nb;
  }
}

Gradients& Gradients::operator*=(double s) {
  for (auto& w : weight) w *= s;
  for (auto& b : bias) b *= s;
  return *this;
}

Gradients Backward(const Model& model, const ForwardPass& pass,
                   const Matrix& grad_logits) {
  const auto& stages = model.stages();
  Gradients g = Gradients::ZerosLike(model);
  Matrix delta = grad_logits;  // gradient w.r.t. the pre-activation of stage s
  for (std::size_t s = stages.size(); s-- > 0;) {
    const Matrix& input = pass.inputs[s];
    g.weight[s] = delta.transpose() * input;
    g.bias[s] = delta.colwise().sum().transpose();
    if (s == 0) break;
    Matrix upstream = delta * stages[s].weight;
    // inputs[s] is the tanh output of stage s - 1.
    delta = upstream.array() * (1.0 - input.array().square());
  }
  return g;
}

OptimizerState OptimizerState::For(const Model& model, double momentum,
                                   double weight_decay) {
  OptimizerState opt;
  opt.momentum = momentum;
  opt.weight_decay = weight_decay;
  opt.velocity = Gradients::ZerosLike(model);
  return opt;
}

void ScheduleConfig::Validate() const {
  auto fail = [](const std::string& why) { return UsageError("trainer", "schedule", why); };
  if (!(ref_lr >= 0.0)) throw fail("ref_lr must be non-negative");
  if (!(ref_batch > 0.0) || batch == 0) throw fail("batch sizes must be positive");
  if (!(warmup_epochs >= 0.0)) throw fail("warmup_epochs must be non-negative");
  if (!(warmup_start > 0.0) || !(warmup_factor > 0.0)) throw fail("warm-up must be positive");
  if (!(decay_factor > 0.0) || !(decay_every_epochs > 0.0)) throw fail("decay must be positive");
  if (!(max_epochs > warmup_epochs)) throw fail("max_epochs must exceed warmup_epochs");
  if (!(poly_power > 0.0)) throw fail("poly_power must be positive");
  if (steps_per_epoch == 0) throw fail("steps_per_epoch must be positive");
  for (const auto& [group, mult] : group_multipliers) {
    if (!(mult >= 0.0)) throw fail("multiplier for group " + group + " is negative");
  }
}

double BaseLr(const ScheduleConfig& config) {
  return config.ref_lr * static_cast<double>(config.batch) / config.ref_batch;
}

double WarmupLr(double epoch, const ScheduleConfig& config) {
  return config.warmup_start * std::pow(config.warmup_factor, std::floor(epoch));
}

double LrAt(double epoch, const ScheduleConfig& config) {
  if (!(epoch >= 0.0 && epoch <= config.max_epochs)) {
    std::ostringstream msg;
    msg << "epoch " << epoch << " outside [0, " << config.max_epochs << "]";
    throw UsageError("trainer", "epoch-range", msg.str());
  }
  if (epoch < config.warmup_epochs) {
    return WarmupLr(epoch, config);
  }
  const double base = BaseLr(config);
  const double since = epoch - config.warmup_epochs;
  if (config.policy == LrPolicy::kStep) {
    return base * std::pow(config.decay_factor, std::floor(since / config.decay_every_epochs));
  }
  const double progress = since / (config.max_epochs - config.warmup_epochs);
  return base * std::pow(1.0 - progress, config.poly_power);
}

double GroupLr(const std::string& group, double lr, const ScheduleConfig& config) {
  auto it = config.group_multipliers.find(group);
  if (it == config.group_multipliers.end()) {
    throw UsageError("trainer", "unknown-group", "no learning-rate multiplier for group '" + group + "'");
  }
  return lr * it->second;
}

BatchPlan PlanBatch(const BinaryMatrix& labels, const LossConfig& loss,
                    AdaptiveWeightState& adaptive, Rng& rng) {
  BatchPlan plan;
  plan.mask = DownsampleBatch(labels, loss.neg_ratio, loss.skip_prob, rng);
  plan.weights = WeightMatrix(labels, adaptive.ObserveBatch(labels));
  return plan;
}

GradientSum AccumulateMultiLabel(const Model& model, const Matrix& features,
                                 const BinaryMatrix& labels, const BatchPlan& plan,
                                 const LossConfig& loss) {
  CheckRows(features, labels.rows(), "multi-label batch");
  if (model.head() != HeadKind::kSigmoid) {
    throw UsageError("trainer", "head", "multi-label loss needs a sigmoid head");
  }
  ForwardPass pass = Forward(model, features);
  BatchLabels batch{labels, pass.probs};
  LossSum ls = WeightedBceSum(batch, plan.weights, loss, plan.mask);
  GradientSum out;
  out.grads = Backward(model, pass, ls.grad_sum);
  out.loss_sum = ls.loss_sum;
  out.active = ls.active;
  return out;
}

GradientSum AccumulateSoftmax(const Model& model, const Matrix& features,
                              std::span<const std::size_t> classes) {
  CheckRows(features, static_cast<Eigen::Index>(classes.size()), "softmax batch");
  if (model.head() != HeadKind::kSoftmax) {
    throw UsageError("trainer", "head", "softmax loss needs a softmax head");
  }
  ForwardPass pass = Forward(model, features);
  Matrix grad = pass.probs;
  GradientSum out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto cls = static_cast<Eigen::Index>(classes[i]);
    if (cls >= grad.cols()) {
      throw DataError("trainer", "class-range", "class index beyond head size");
    }
    out.loss_sum -= std::log(std::max(pass.probs(row, cls), 1e-300));
    grad(row, cls) -= 1.0;
  }
  out.grads = Backward(model, pass, grad);
  out.active = classes.size();
  return out;
}

double CurrentLr(const OptimizerState& opt, const ScheduleConfig& config) {
  const double epoch =
      static_cast<double>(opt.step) / static_cast<double>(config.steps_per_epoch);
  return LrAt(epoch, config);
}

void ApplyUpdate(Model& model, const Gradients& grads, OptimizerState& opt,
                 double lr, const ScheduleConfig& config) {
  auto& stages = model.mutable_stages();
  if (opt.velocity.weight.size() != stages.size()) {
    opt.velocity = Gradients::ZerosLike(model);
  }
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const double glr = GroupLr(stages[s].group, lr, config);
    Matrix& vw = opt.velocity.weight[s];
    Vector& vb = opt.velocity.bias[s];
    vw = opt.momentum * vw + (grads.weight[s] + opt.weight_decay * stages[s].weight);
    vb = opt.momentum * vb + (grads.bias[s] + opt.weight_decay * stages[s].bias);
    stages[s].weight -= glr * vw;
    stages[s].bias -= glr * vb;
  }
}

double FinishStep(Model& model, GradientSum sum, std::size_t count,
                  OptimizerState& opt, const ScheduleConfig& config) {
  double loss = 0.0;
  if (count > 0) {
    const double scale = 1.0 / static_cast<double>(count);
    loss = sum.loss_sum * scale;
    sum.grads *= scale;
  }
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite loss " << loss << " at step " << opt.step
        << " (loss_sum=" << sum.loss_sum << ", active=" << count << ")";
    throw NumericalError("trainer", "non-finite", msg.str());
  }
  const double lr = CurrentLr(opt, config);
  ApplyUpdate(model, sum.grads, opt, lr, config);
  if (!model.AllFinite()) {
    throw NumericalError("trainer", "non-finite",
                         "parameters became non-finite at step " + std::to_string(opt.step) +
                             " (lr=" + std::to_string(lr) + ")");
  }
  ++opt.step;
  opt.epoch = opt.step / config.steps_per_epoch;
  return loss;
}

double TrainStep(Model& model, const Matrix& features, const BinaryMatrix& labels,
                 OptimizerState& opt, const LossConfig& loss,
                 const ScheduleConfig& schedule, AdaptiveWeightState& adaptive,
                 Rng& rng) {
  const BatchPlan plan = PlanBatch(labels, loss, adaptive, rng);
  GradientSum sum = AccumulateMultiLabel(model, features, labels, plan, loss);
  const std::size_t active = sum.active;
  return FinishStep(model, std::move(sum), active, opt, schedule);
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch, Rng rng)
    : n_(n), batch_(batch), rng_(std::move(rng)) {
  if (n == 0 || batch == 0) {
    throw UsageError("trainer", "sampler", "sampler needs data and a positive batch");
  }
}

std::vector<std::size_t> BatchSampler::Next() {
  std::vector<std::size_t> out;
  out.reserve(batch_);
  while (out.size() < batch_) {
    if (cursor_ == order_.size()) {
      order_ = Permutation(n_, rng_);
      cursor_ = 0;
    }
    out.push_back(order_[cursor_++]);
  }
  return out;
}

Matrix GatherRows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

BinaryMatrix GatherRows(const BinaryMatrix& m, std::span<const std::size_t> rows) {
  BinaryMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

TrainHistory Train(Model& model, const TrainingData& data, std::size_t steps,
                   std::uint64_t seed, OptimizerState& opt, const LossConfig& loss,
                   const ScheduleConfig& schedule, AdaptiveWeightState& adaptive) {
  loss.Validate();
  schedule.Validate();
  CheckRows(data.features, data.labels.rows(), "training data");
  BatchSampler sampler(static_cast<std::size_t>(data.features.rows()), schedule.batch,
                       Rng::Stream(seed, "trainer.batches"));
  Rng mask_rng = Rng::Stream(seed, "trainer.downsample");
  TrainHistory history;
  history.losses.reserve(steps);
  for (std::size_t step = 0; step < steps; ++step) {
    const auto rows = sampler.Next();
    history.losses.push_back(TrainStep(model, GatherRows(data.features, rows),
                                       GatherRows(data.labels, rows), opt, loss,
                                       schedule, adaptive, mask_rng));
  }
  return history;
}

Model ReplaceHead(const Model& pretrained, std::size_t new_head_dim,
                  HeadKind head, Rng& rng) {
  if (new_head_dim == 0) {
    throw UsageError("trainer", "head", "new head dimension must be positive");
  }
  std::vector<Stage> stages = pretrained.stages();
  Stage& top = stages.back();
  const auto in = top.weight.cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  top.weight.resize(static_cast<Eigen::Index>(new_head_dim), in);
  for (Eigen::Index r = 0; r < top.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < in; ++c) top.weight(r, c) = rng.Normal(0.0, scale);
  }
  top.bias = Vector::Zero(static_cast<Eigen::Index>(new_head_dim));
  return Model(std::move(stages), head);
}

FineTuneResult FineTune(const Model& pretrained, std::size_t new_head_dim,
                        HeadKind head, const TrainingData& data, std::size_t steps,
                        std::uint64_t seed, const LossConfig& loss,
                        const ScheduleConfig& schedule, double momentum,
                        double weight_decay) {
  schedule.Validate();
  if (static_cast<std::size_t>(data.features.cols()) != pretrained.input_dim()) {
    throw UsageError("trainer", "shape", "fine-tune features do not match the pretrained input");
  }
  Rng head_rng = Rng::Stream(seed, "trainer.head");
  FineTuneResult result{ReplaceHead(pretrained, new_head_dim, head, head_rng), {}};
  OptimizerState opt = OptimizerState::For(result.model, momentum, weight_decay);
  if (head == HeadKind::kSigmoid) {
    if (static_cast<std::size_t>(data.labels.cols()) != new_head_dim) {
      throw UsageError("trainer", "shape", "label columns do not match the new head");
    }
    AdaptiveWeightState adaptive(new_head_dim);
    result.history = Train(result.model, data, steps, seed, opt, loss, schedule, adaptive);
    return result;
  }
  CheckRows(data.features, static_cast<Eigen::Index>(data.classes.size()), "fine-tune data");
  for (std::size_t c : data.classes) {
    if (c >= new_head_dim) {
      throw DataError("trainer", "class-range", "class index beyond the new head");
    }
  }
  BatchSampler sampler(data.classes.size(), schedule.batch, Rng::Stream(seed, "trainer.batches"));
  for (std::size_t step = 0; step < steps; ++step) {
    const auto rows = sampler.Next();
    std::vector<std::size_t> classes;
    classes.reserve(rows.size());
    for (std::size_t r : rows) classes.push_back(data.classes[r]);
    GradientSum sum = AccumulateSoftmax(result.model, GatherRows(data.features, rows), classes);
    result.history.losses.push_back(
        FinishStep(result.model, std::move(sum), rows.size(), opt, schedule));
  }
  return result;
}

}  // namespace mlforge
