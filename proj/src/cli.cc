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

#include "mlforge/cli.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "mlforge/checkpoint.h"
#include "mlforge/cooccur.h"
#include "mlforge/curation.h"
#include "mlforge/distsim.h"
#include "mlforge/error.h"
#include "mlforge/metrics.h"
#include "mlforge/preprocess.h"
#include "mlforge/rng.h"
#include "mlforge/run_config.h"
#include "mlforge/taxonomy.h"
#include "mlforge/text.h"
#include "mlforge/trainer.h"

namespace mlforge {
namespace {

namespace fs = std::filesystem;

enum class LogLevel { kQuiet, kError, kWarn, kInfo, kDebug };

// MLFORGE_LOG: quiet|error|warn|info|debug, or 0..4. Defaults to warn.
LogLevel LevelFromEnv() {
  const char* raw = std::getenv("MLFORGE_LOG");
  if (raw == nullptr) return LogLevel::kWarn;
  const std::string v(raw);
  static const std::map<std::string, LogLevel> kNames{
      {"quiet", LogLevel::kQuiet}, {"error", LogLevel::kError}, {"warn", LogLevel::kWarn},
      {"info", LogLevel::kInfo},   {"debug", LogLevel::kDebug}, {"0", LogLevel::kQuiet},
      {"1", LogLevel::kError},     {"2", LogLevel::kWarn},      {"3", LogLevel::kInfo},
      {"4", LogLevel::kDebug}};
  auto it = kNames.find(v);
  return it == kNames.end() ? LogLevel::kWarn : it->second;
}

class Log {
 public:
  Log(std::ostream& err, LogLevel level) : err_(err), level_(level) {}

  void Warn(const std::string& msg) const { Emit(LogLevel::kWarn, "warn", msg); }
  void Info(const std::string& msg) const { Emit(LogLevel::kInfo, "info", msg); }
  void Debug(const std::string& msg) const { Emit(LogLevel::kDebug, "debug", msg); }
  bool enabled(LogLevel level) const { return level_ >= level; }

 private:
  void Emit(LogLevel level, const char* tag, const std::string& msg) const {
    if (level_ >= level) err_ << '[' << tag << "] " << msg << '\n';
  }

  std::ostream& err_;
  LogLevel level_;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  Log log;
};

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cli", "io", "cannot write " + path.string());
  f << text;
  if (!f) throw DataError("cli", "io", "failed writing " + path.string());
}

std::map<std::size_t, double> ReadTimings(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cli", "io", "cannot open " + path.string());
  return ParseTimings(f);
}

RunConfig LoadConfig(const std::string& path) {
  return path.empty() ? RunConfig{} : ReadRunConfig(path);
}

std::vector<CatId> ColumnsOf(const Manifest& manifest) {
  const CatSet vocab = manifest.Vocabulary();
  return {vocab.begin(), vocab.end()};
}

std::size_t CountTags(const Manifest& manifest) {
  std::size_t n = 0;
  for (const ImageRecord& r : manifest.records()) n += r.tags.size();
  return n;
}

std::map<CatId, std::size_t> ColumnIndex(const std::vector<CatId>& columns) {
  std::map<CatId, std::size_t> index;
  for (std::size_t j = 0; j < columns.size(); ++j) index[columns[j]] = j;
  return index;
}

Matrix FeaturesOf(const Manifest& manifest) {
  if (!manifest.feature_dim()) {
    throw DataError("cli", "no-features", "manifest records carry no feature vectors");
  }
  const auto dim = static_cast<Eigen::Index>(*manifest.feature_dim());
  Matrix x(static_cast<Eigen::Index>(manifest.size()), dim);
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const ImageRecord& r = manifest.records()[i];
    if (!r.features) {
      throw DataError("cli", "no-features", "record '" + r.image_id + "' has no features");
    }
    for (Eigen::Index c = 0; c < dim; ++c) {
      x(static_cast<Eigen::Index>(i), c) = (*r.features)[static_cast<std::size_t>(c)];
    }
  }
  return x;
}

// Any tag counts as a positive; tags outside `columns` are ignored.
BinaryMatrix LabelsOf(const Manifest& manifest, const std::vector<CatId>& columns) {
  const auto index = ColumnIndex(columns);
  BinaryMatrix y = BinaryMatrix::Zero(static_cast<Eigen::Index>(manifest.size()),
                                      static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    for (const Tag& t : manifest.records()[i].tags) {
      auto it = index.find(t.cat);
      if (it != index.end()) {
        y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(it->second)) = 1;
      }
    }
  }
  return y;
}

// Single-label target: the most confident tag, lowest id on ties.
std::vector<std::size_t> ClassesOf(const Manifest& manifest,
                                   const std::vector<CatId>& columns) {
  const auto index = ColumnIndex(columns);
  std::vector<std::size_t> classes;
  for (const ImageRecord& r : manifest.records()) {
    const Tag* best = nullptr;
    for (const Tag& t : r.tags) {
      if (best == nullptr || t.confidence > best->confidence) best = &t;
    }
    if (best == nullptr) {
      throw DataError("cli", "no-label", "record '" + r.image_id + "' has no tags");
    }
    classes.push_back(index.at(best->cat));
  }
  return classes;
}

TrainingData TrainingDataOf(const Manifest& manifest, const std::vector<CatId>& columns,
                            bool single_label) {
  TrainingData data;
  data.features = FeaturesOf(manifest);
  data.labels = LabelsOf(manifest, columns);
  if (single_label) data.classes = ClassesOf(manifest, columns);
  return data;
}

std::string LossLog(const std::vector<double>& losses) {
  std::ostringstream out;
  out << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out << i << ',' << FormatShortest(losses[i]) << '\n';
  }
  return out.str();
}

using Action = std::function<void()>;

// ---------------------------------------------------------------------------

Action AddTaxonomyStats(CLI::App& app, Context& ctx) {
  auto* cmd = app.add_subcommand("taxonomy-stats", "Summarize a category hierarchy");
  auto taxonomy = std::make_shared<std::string>();
  cmd->add_option("--taxonomy", *taxonomy, "Taxonomy file")->required();
  return [cmd, taxonomy, &ctx] {
    if (!*cmd) return;
    const LabelGraph graph = LoadTaxonomy(*taxonomy);
    ctx.out << "categories=" << graph.size() << '\n' << RenderHierarchyStats(graph.Stats());
  };
}

Action AddAugment(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string manifest, taxonomy, pairs, machine, co_out, pairs_out, out;
    double annotate_threshold = 0.95;
    double co_threshold = 0.5;
    std::size_t shards = 1;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand(
      "augment",
      "Add ancestor tags, then co-occurrence tags, then ancestors of those");
  cmd->add_option("--manifest", o->manifest, "Input manifest")->required();
  cmd->add_option("--taxonomy", o->taxonomy, "Taxonomy file")->required();
  auto* pairs = cmd->add_option("--pairs", o->pairs, "Strong pairs file (i<TAB>j)");
  auto* machine = cmd->add_option(
      "--machine-scores", o->machine,
      "Manifest of machine scores; derives strong pairs from co-occurrence");
  pairs->excludes(machine);
  cmd->add_option("--annotate-threshold", o->annotate_threshold,
                  "Machine annotation keeps scores strictly above this")
      ->capture_default_str();
  cmd->add_option("--co-threshold", o->co_threshold,
                  "Strong pairs need a co-occurrence ratio strictly above this")
      ->capture_default_str();
  cmd->add_option("--co-out", o->co_out, "Write the co-occurrence matrix")->needs(machine);
  cmd->add_option("--pairs-out", o->pairs_out, "Write the derived strong pairs")
      ->needs(machine);
  cmd->add_option("--shards", o->shards, "Parallel shards for co-occurrence counting")
      ->capture_default_str();
  cmd->add_option("--out", o->out, "Output manifest")->required();
  return [cmd, o, &ctx] {
    if (!*cmd) return;
    const LabelGraph graph = LoadTaxonomy(o->taxonomy);
    const Manifest input = ReadManifest(o->manifest);
    const Manifest propagated = PropagateManifest(input, graph);

    PairSet pairs;
    if (!o->pairs.empty()) pairs = ReadPairs(o->pairs);
    if (!o->machine.empty()) {
      const TagStream machine =
          MachineAnnotate(ReadManifest(o->machine), o->annotate_threshold);
      const CoMatrix co = ComputeCooccurrence(ToTagStream(propagated), machine, o->shards);
      pairs = StrongPairs(co, graph, o->co_threshold);
      if (!o->co_out.empty()) {
        std::ostringstream text;
        WriteCoMatrix(co, text);
        WriteFile(o->co_out, text.str());
      }
      if (!o->pairs_out.empty()) {
        std::ostringstream text;
        WritePairs(pairs, text);
        WriteFile(o->pairs_out, text.str());
      }
    }
    const Manifest augmented =
        PropagateManifest(AugmentByCooccurrence(propagated, pairs, graph), graph);
    WriteFile(o->out, ManifestToString(augmented));
    ctx.log.Info("augment: " + std::to_string(CountTags(input)) + " tags -> " +
                 std::to_string(CountTags(propagated)) + " after hierarchy -> " +
                 std::to_string(CountTags(augmented)) + " after " +
                 std::to_string(pairs.size()) + " co-occurrence pairs");
    ctx.out << "records=" << augmented.size() << " tags_in=" << CountTags(input)
            << " tags_out=" << CountTags(augmented) << " pairs=" << pairs.size() << '\n';
  };
}

Action AddCurate(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string manifest, merge, synonyms, removed_out, val_out, out;
    std::size_t min_count = 650;
    std::vector<std::uint32_t> drop;
    std::size_t val_size = 0;
    std::size_t val_cap = 5;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand(
      "curate", "Merge vocabularies, filter rare or dropped categories, split off validation");
  cmd->add_option("--manifest", o->manifest, "Input manifest")->required();
  auto* merge = cmd->add_option("--merge", o->merge, "Second manifest to merge in");
  cmd->add_option("--synonyms", o->synonyms, "Synonym map (from<TAB>to) for --merge")
      ->needs(merge);
  cmd->add_option("--min-count", o->min_count,
                  "Drop categories with fewer images than this")
      ->capture_default_str();
  cmd->add_option("--drop", o->drop, "Category ids to drop (comma separated)")
      ->delimiter(',');
  cmd->add_option("--removed-out", o->removed_out, "Write removed category ids");
  auto* val_out = cmd->add_option("--val-out", o->val_out, "Write a validation split here");
  cmd->add_option("--val-size", o->val_size, "Target validation size")->needs(val_out);
  cmd->add_option("--val-cap", o->val_cap, "Per-category cap in the validation split")
      ->capture_default_str();
  cmd->add_option("--seed", o->seed, "Seed for the validation split")->capture_default_str();
  cmd->add_option("--out", o->out, "Output manifest (training part when splitting)")
      ->required();
  return [cmd, o, &ctx] {
    if (!*cmd) return;
    Manifest manifest = ReadManifest(o->manifest);
    if (!o->merge.empty()) {
      const SynonymMap synonyms =
          o->synonyms.empty() ? SynonymMap{} : ReadSynonymMap(o->synonyms);
      manifest = MergeVocabularies(manifest, ReadManifest(o->merge), synonyms);
    }
    CatSet drop;
    for (std::uint32_t id : o->drop) drop.insert(MakeCatId(id));
    FilterResult filtered = FilterVocabulary(manifest, o->min_count, drop);
    ctx.log.Info("curate: removed " + std::to_string(filtered.removed.size()) +
                 " categories, kept " + std::to_string(filtered.manifest.size()) + " records");
    if (!o->removed_out.empty()) {
      std::ostringstream text;
      for (CatId id : filtered.removed) text << Value(id) << '\n';
      WriteFile(o->removed_out, text.str());
    }
    Manifest train = std::move(filtered.manifest);
    if (!o->val_out.empty()) {
      SplitResult split = SplitValidation(train, o->val_size, o->val_cap, o->seed);
      if (split.short_of_target) {
        ctx.log.Warn("validation split has " + std::to_string(split.val.size()) +
                     " records, short of " + std::to_string(o->val_size) +
                     " because of the per-category cap");
      }
      WriteFile(o->val_out, ManifestToString(split.val));
      ctx.out << "val_records=" << split.val.size()
              << " short_of_target=" << (split.short_of_target ? 1 : 0) << '\n';
      train = std::move(split.train);
    }
    WriteFile(o->out, ManifestToString(train));
    ctx.out << "records=" << train.size() << " removed_categories=" << filtered.removed.size()
            << '\n';
  };
}

Action AddStats(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string manifest, per_category_out, tags_out;
    std::size_t trainable_threshold = 650;
    bool log2 = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("stats", "Images per category and tags per image");
  cmd->add_option("--manifest", o->manifest, "Input manifest")->required();
  cmd->add_option("--trainable-threshold", o->trainable_threshold,
                  "Categories with more images than this count as trainable")
      ->capture_default_str();
  cmd->add_flag("--log2", o->log2, "Add log2-scaled counts to the per-category CSV");
  cmd->add_option("--per-category-out", o->per_category_out, "Per-category CSV");
  cmd->add_option("--tags-per-image-out", o->tags_out, "Tags-per-image CSV");
  return [cmd, o, &ctx] {
    if (!*cmd) return;
    const StatsReport report = RenderStatsReport(ComputeDatasetStats(ReadManifest(o->manifest)),
                                                 o->trainable_threshold, o->log2);
    ctx.out << report.summary;
    if (!o->per_category_out.empty()) WriteFile(o->per_category_out, report.per_category_csv);
    if (!o->tags_out.empty()) WriteFile(o->tags_out, report.tags_per_image_csv);
  };
}

Action AddPreprocess(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string in, out;
    std::uint64_t seed = 0;
    std::uint64_t index = 0;
    std::size_t out_size = 224;
    bool trace = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("preprocess", "Random crop, resize, flip, rotate, color shift, rescale");
  cmd->add_option("--in", o->in, "Input raster (H W C header, then values in [0, 255])")
      ->required();
  cmd->add_option("--out", o->out, "Output raster")->required();
  cmd->add_option("--preprocess-seed", o->seed, "Seed for the random steps")
      ->capture_default_str();
  cmd->add_option("--index", o->index, "Image index; selects an independent random stream")
      ->capture_default_str();
  cmd->add_option("--out-size", o->out_size, "Output height and width")->capture_default_str();
  cmd->add_flag("--trace", o->trace, "Print the sampled parameters");
  return [cmd, o, &ctx] {
    if (!*cmd) return;
    PreprocessConfig config;
    config.out_size = o->out_size;
    Rng rng = Rng::Stream(o->seed, "preprocess", o->index);
    PreprocessTrace trace;
    const Raster result = PreprocessImage(ReadRaster(o->in), config, rng, &trace);
    std::ostringstream text;
    WriteRaster(result, text);
    WriteFile(o->out, text.str());
    if (o->trace) {
      ctx.out << "crop=" << trace.crop.x << ',' << trace.crop.y << ',' << trace.crop.width
              << ',' << trace.crop.height << " flipped=" << (trace.flipped ? 1 : 0);
      ctx.out << " rotation=" << (trace.rotation_degrees
                                      ? FormatFixed(*trace.rotation_degrees, 4)
                                      : std::string("none"));
      ctx.out << " color_shift=";
      if (trace.color_shift) {
        const auto& s = *trace.color_shift;
        ctx.out << FormatFixed(s[0], 4) << ',' << FormatFixed(s[1], 4) << ','
                << FormatFixed(s[2], 4);
      } else {
        ctx.out << "none";
      }
      ctx.out << '\n';
    }
  };
}

Action AddTrain(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string manifest, config, out, loss_log;
    std::size_t steps = 200;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("train", "Train a multi-label model on manifest features");
  cmd->add_option("--manifest", o->manifest, "Training manifest with features")->required();
  cmd->add_option("--config", o->config, "Run config (key=value)");
  cmd->add_option("--steps", o->steps, "Optimizer steps")->capture_default_str();
  cmd->add_option("--seed", o->seed, "Seed for initialization, batches and down-sampling")
      ->capture_default_str();
  cmd->add_option("--out", o->out, "Output checkpoint")->required();
  cmd->add_option("--loss-log", o->loss_log, "Write per-step loss CSV");
  return [cmd, o, &ctx] {
    if (!*cmd) return;
    const RunConfig cfg = LoadConfig(o->config);
    const Manifest manifest = ReadManifest(o->manifest);
    Checkpoint ckpt;
    ckpt.columns = ColumnsOf(manifest);
    if (ckpt.columns.empty()) throw DataError("cli", "no-labels", "manifest has no tags");
    const TrainingData data = TrainingDataOf(manifest, ckpt.columns, false);

    ModelSpec spec{static_cast<std::size_t>(data.features.cols()), cfg.hidden,
                   ckpt.columns.size(), HeadKind::kSigmoid, cfg.groups};
    Rng init_rng = Rng::Stream(o->seed, "trainer.init");
    ckpt.model = Model::Initialize(spec, init_rng);
    ckpt.optimizer = OptimizerState::For(ckpt.model, cfg.momentum, cfg.weight_decay);
    ckpt.adaptive = AdaptiveWeightState(ckpt.columns.size());
    const TrainHistory history = Train(ckpt.model, data, o->steps, o->seed, ckpt.optimizer,
                                       cfg.loss, cfg.schedule, ckpt.adaptive);
    WriteCheckpoint(ckpt, fs::path(o->out));
    if (!o->loss_log.empty()) WriteFile(o->loss_log, LossLog(history.losses));
    ctx.out << "steps=" << o->steps << " final_loss="
            << (history.losses.empty() ? std::string("nan")
                                       : FormatFixed(history.losses.back(), 6))
            << '\n';
  };
}

Action AddFineTune(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string checkpoint, manifest, config, out, loss_log, head = "softmax";
    std::size_t steps = 200;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand(
      "finetune", "Replace the output stage and train with per-group learning rates");
  cmd->add_option("--checkpoint", o->checkpoint, "Pretrained checkpoint")->required();
  cmd->add_option("--manifest", o->manifest, "Target-task manifest with features")->required();
  cmd->add_option("--head", o->head, "softmax (single label) or sigmoid (multi-label)")
      ->check(CLI::IsMember({"softmax", "sigmoid"}))
      ->capture_default_str();
  cmd->add_option("--config", o->config, "Run config; group.<name>=<multiplier> sets rates");
  cmd->add_option("--steps", o->steps, "Optimizer steps")->capture_default_str();
  cmd->add_option("--seed", o->seed, "Seed for the new head, batches and down-sampling")
      ->capture_default_str();
  cmd->add_option("--out", o->out, "Output checkpoint")->required();
  cmd->add_option("--loss-log", o->loss_log, "Write per-step loss CSV");
  return [cmd, o, &ctx] {
    if (!*cmd) return;
    const RunConfig cfg = LoadConfig(o->config);
    const Checkpoint pretrained = ReadCheckpoint(o->checkpoint);
    const Manifest manifest = ReadManifest(o->manifest);
    const HeadKind head = o->head == "softmax" ? HeadKind::kSoftmax : HeadKind::kSigmoid;
    Checkpoint ckpt;
    ckpt.columns = ColumnsOf(manifest);
    if (ckpt.columns.empty()) throw DataError("cli", "no-labels", "manifest has no tags");
    const TrainingData data = TrainingDataOf(manifest, ckpt.columns, head == HeadKind::kSoftmax);
    FineTuneResult result =
        FineTune(pretrained.model, ckpt.columns.size(), head, data, o->steps, o->seed, cfg.loss,
                 cfg.schedule, cfg.momentum, cfg.weight_decay);
    ckpt.model = std::move(result.model);
    ckpt.optimizer = OptimizerState::For(ckpt.model, cfg.momentum, cfg.weight_decay);
    ckpt.adaptive = AdaptiveWeightState(ckpt.columns.size());
    WriteCheckpoint(ckpt, fs::path(o->out));
    if (!o->loss_log.empty()) WriteFile(o->loss_log, LossLog(result.history.losses));
    ctx.out << "steps=" << o->steps << " final_loss="
            << (result.history.losses.empty() ? std::string("nan")
                                              : FormatFixed(result.history.losses.back(), 6))
            << '\n';
  };
}

Action AddEval(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string labels, scores, checkpoint, per_instance;
    std::vector<std::size_t> ks{1};
    bool include_empty = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand("eval", "Instance-level top-k precision, recall and F1");
  cmd->add_option("--labels", o->labels, "Ground-truth manifest")->required();
  auto* scores = cmd->add_option(
      "--scores", o->scores, "Score manifest: same image ids, tag confidences are scores");
  auto* ckpt = cmd->add_option("--checkpoint", o->checkpoint,
                               "Score the --labels features with this checkpoint");
  scores->excludes(ckpt);
  cmd->add_option("--k", o->ks, "Cut-offs (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--per-instance", o->per_instance, "Write per-instance CSV");
  cmd->add_flag("--include-empty", o->include_empty,
                "Average over images without positive labels too (scored 0)");
  return [cmd, o, &ctx] {
    if (!*cmd) return;
    if (o->scores.empty() == o->checkpoint.empty()) {
      throw UsageError("cli", "usage", "eval needs exactly one of --scores or --checkpoint");
    }
    const Manifest truth = ReadManifest(o->labels);
    std::vector<CatId> columns;
    Matrix scores;
    if (!o->checkpoint.empty()) {
      const Checkpoint c = ReadCheckpoint(o->checkpoint);
      columns = c.columns;
      scores = Predict(c.model, FeaturesOf(truth));
    } else {
      const Manifest predicted = ReadManifest(o->scores);
      std::map<std::string, const ImageRecord*> by_id;
      for (const ImageRecord& r : predicted.records()) by_id[r.image_id] = &r;
      columns = ColumnsOf(predicted);
      const auto index = ColumnIndex(columns);
      scores = Matrix::Zero(static_cast<Eigen::Index>(truth.size()),
                            static_cast<Eigen::Index>(columns.size()));
      for (std::size_t i = 0; i < truth.size(); ++i) {
        auto it = by_id.find(truth.records()[i].image_id);
        if (it == by_id.end()) {
          throw DataError("cli", "missing-scores",
                          "no scores for image '" + truth.records()[i].image_id + "'");
        }
        for (const Tag& t : it->second->tags) {
          scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(index.at(t.cat))) =
              t.confidence;
        }
      }
    }
    // Ground-truth categories the scorer never predicts still count as misses.
    std::vector<CatId> all = columns;
    for (CatId id : truth.Vocabulary()) {
      if (!std::binary_search(columns.begin(), columns.end(), id)) all.push_back(id);
    }
    if (all.size() > columns.size()) {
      Matrix padded = Matrix::Zero(scores.rows(), static_cast<Eigen::Index>(all.size()));
      padded.leftCols(scores.cols()) = scores;
      scores = std::move(padded);
    }
    const BinaryMatrix labels = LabelsOf(truth, all);

    std::ostringstream csv;
    csv << "k,image_id,precision,recall,f1\n";
    for (std::size_t k : o->ks) {
      const EvalResult r = InstanceMetrics(labels, scores, k, !o->include_empty);
      ctx.out << RenderEvalRow(r) << '\n';
      for (const InstanceScore& s : r.per_instance) {
        csv << k << ',' << truth.records()[s.row].image_id << ','
            << FormatFixed(s.precision, 6) << ',' << FormatFixed(s.recall, 6) << ','
            << FormatFixed(s.f1, 6) << '\n';
      }
    }
    if (!o->per_instance.empty()) WriteFile(o->per_instance, csv.str());
  };
}

Action AddDistsim(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string manifest, config, init, out, divergence_log, scaling_csv, timings;
    std::size_t workers = 1, batch = 8, steps = 50;
    std::uint64_t seed = 0;
    bool threaded = false;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand(
      "distsim", "Simulate synchronous data-parallel SGD with ring all-reduce");
  cmd->add_option("--manifest", o->manifest, "Training manifest with features")->required();
  cmd->add_option("--workers", o->workers, "Logical workers k")->capture_default_str();
  cmd->add_option("--batch", o->batch, "Per-worker batch b")->capture_default_str();
  cmd->add_option("--steps", o->steps, "Synchronous steps")->capture_default_str();
  cmd->add_option("--seed", o->seed, "Seed for initialization, batches and down-sampling")
      ->capture_default_str();
  cmd->add_option("--config", o->config, "Run config (key=value); batch is set to k*b");
  cmd->add_option("--init", o->init, "Start from this checkpoint instead of a fresh model");
  cmd->add_option("--out", o->out, "Final checkpoint");
  cmd->add_option("--divergence-log", o->divergence_log,
                  "Per-step CSV of replica divergence and loss");
  cmd->add_option("--scaling-csv", o->scaling_csv, "Throughput and scaling efficiency CSV");
  cmd->add_option("--timings", o->timings,
                  "CSV workers,step_seconds for the scaling report (default: measured)");
  cmd->add_flag("--threaded", o->threaded, "Run each worker on its own thread");
  return [cmd, o, &ctx] {
    if (!*cmd) return;
    const RunConfig cfg = LoadConfig(o->config);
    const Manifest manifest = ReadManifest(o->manifest);
    Checkpoint init;
    if (!o->init.empty()) {
      init = ReadCheckpoint(o->init);
    } else {
      init.columns = ColumnsOf(manifest);
      if (init.columns.empty()) throw DataError("cli", "no-labels", "manifest has no tags");
    }
    const TrainingData data = TrainingDataOf(manifest, init.columns, false);
    if (o->init.empty()) {
      ModelSpec spec{static_cast<std::size_t>(data.features.cols()), cfg.hidden,
                     init.columns.size(), HeadKind::kSigmoid, cfg.groups};
      Rng init_rng = Rng::Stream(o->seed, "trainer.init");
      init.model = Model::Initialize(spec, init_rng);
    }

    ParallelConfig pc;
    pc.workers = o->workers;
    pc.per_worker_batch = o->batch;
    pc.steps = o->steps;
    pc.seed = o->seed;
    pc.execution = o->threaded ? Execution::kThreaded : Execution::kSequential;
    pc.momentum = cfg.momentum;
    pc.weight_decay = cfg.weight_decay;
    const ParallelResult result = ParallelTrain(init.model, data, pc, cfg.loss, cfg.schedule);

    if (!o->out.empty()) {
      Checkpoint ckpt{result.model, result.optimizer, result.adaptive, init.columns};
      WriteCheckpoint(ckpt, fs::path(o->out));
    }
    if (!o->divergence_log.empty()) {
      std::ostringstream text;
      text << "step,max_abs_divergence,loss\n";
      for (std::size_t i = 0; i < result.divergence.size(); ++i) {
        text << result.divergence[i].step << ',' << FormatShortest(result.divergence[i].max_abs)
             << ',' << FormatShortest(result.losses[i]) << '\n';
      }
      WriteFile(o->divergence_log, text.str());
    }
    if (!o->scaling_csv.empty()) {
      std::map<std::size_t, double> timings;
      if (!o->timings.empty()) {
        timings = ReadTimings(o->timings);
      } else {
        auto mean = [](const std::vector<double>& v) {
          double s = 0.0;
          for (double x : v) s += x;
          return v.empty() ? 0.0 : s / static_cast<double>(v.size());
        };
        timings[o->workers] = mean(result.step_seconds);
        if (o->workers != 1) {
          ParallelConfig base = pc;
          base.workers = 1;
          timings[1] = mean(ParallelTrain(init.model, data, base, cfg.loss, cfg.schedule)
                                .step_seconds);
        }
      }
      WriteFile(o->scaling_csv, RenderScalingCsv(BuildScalingReport(timings, o->batch)));
    }
    double worst = 0.0;
    for (const DivergenceRecord& d : result.divergence) worst = std::max(worst, d.max_abs);
    ctx.out << "workers=" << o->workers << " steps=" << o->steps
            << " max_divergence=" << FormatShortest(worst) << " final_loss="
            << (result.losses.empty() ? std::string("nan")
                                      : FormatFixed(result.losses.back(), 6))
            << '\n';
  };
}

Action AddSynth(CLI::App& app, Context& ctx) {
  struct Opts {
    std::string out;
    std::size_t images = 200, categories = 4, dim = 8;
    std::uint64_t seed = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* cmd = app.add_subcommand(
      "synth", "Write a linearly separable multi-label manifest with features");
  cmd->add_option("--images", o->images, "Records")->capture_default_str();
  cmd->add_option("--categories", o->categories, "Categories")->capture_default_str();
  cmd->add_option("--dim", o->dim, "Feature dimension")->capture_default_str();
  cmd->add_option("--seed", o->seed, "Seed")->capture_default_str();
  cmd->add_option("--out", o->out, "Output manifest")->required();
  return [cmd, o, &ctx] {
    if (!*cmd) return;
    if (o->categories == 0 || o->dim == 0) {
      throw UsageError("cli", "usage", "synth needs positive --categories and --dim");
    }
    Rng rng = Rng::Stream(o->seed, "synth");
    std::vector<std::vector<double>> planes(o->categories, std::vector<double>(o->dim));
    for (auto& w : planes) {
      for (double& v : w) v = rng.Normal(0.0, 1.0);
    }
    std::vector<ImageRecord> records;
    for (std::size_t i = 0; i < o->images; ++i) {
      ImageRecord r;
      std::ostringstream id;
      id << "syn" << std::setw(5) << std::setfill('0') << i;
      r.image_id = id.str();
      r.source_uri = "synth://" + r.image_id;
      std::vector<double> x(o->dim);
      for (double& v : x) v = std::round(rng.Normal(0.0, 1.0) * 1e4) / 1e4;
      for (std::size_t j = 0; j < o->categories; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < o->dim; ++c) dot += planes[j][c] * x[c];
        if (dot > 0.0) r.AddTag(MakeCatId(static_cast<std::uint32_t>(j)), 1.0);
      }
      r.features = std::move(x);
      records.push_back(std::move(r));
    }
    WriteFile(o->out, ManifestToString(Manifest::FromRecords(std::move(records))));
    ctx.out << "records=" << o->images << '\n';
  };
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
      return kExitUsage;
    case ErrorKind::kData:
      return kExitData;
    case ErrorKind::kNumerical:
      return kExitNumerical;
  }
  return kExitData;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err, Log(err, LevelFromEnv())};
  CLI::App app{"Dataset curation, imbalance-aware multi-label training and a "
               "data-parallel SGD simulator.",
               "mlforge"};
  app.require_subcommand(1);
  app.footer("Errors are reported as 'E:<module>:<code> message'. Exit codes: 0 ok, "
             "1 usage, 2 data, 3 numerical. MLFORGE_LOG=quiet|error|warn|info|debug.");

  const std::vector<Action> actions{
      AddTaxonomyStats(app, ctx), AddAugment(app, ctx),  AddCurate(app, ctx),
      AddStats(app, ctx),         AddPreprocess(app, ctx), AddTrain(app, ctx),
      AddFineTune(app, ctx),      AddEval(app, ctx),     AddDistsim(app, ctx),
      AddSynth(app, ctx)};

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "E:cli:usage " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  }

  try {
    for (const Action& action : actions) action();
  } catch (const Error& e) {
    err << e.Tagged() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    err << "E:cli:internal " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace mlforge
