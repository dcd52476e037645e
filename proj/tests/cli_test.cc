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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mlforge/curation.h"
#include "mlforge/metrics.h"
#include "testing.h"

namespace mlforge {
namespace {

namespace fs = std::filesystem;

const fs::path kData = MLFORGE_TEST_DATA;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void Spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

struct Result {
  int code;
  std::string out, err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("mlforge_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string P(const std::string& name) const { return (dir_ / name).string(); }
  static std::string D(const std::string& name) { return (kData / name).string(); }

  static Result Run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = RunCli(args, out, err);
    return {code, out.str(), err.str()};
  }

  fs::path dir_;
};

TEST_F(CliTest, AugmentMatchesGolden) {
  const Result r = Run({"augment", "--manifest", D("toy.tsv"), "--taxonomy", D("toy.tax"),
                        "--pairs", D("toy.pairs"), "--out", P("aug.tsv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Slurp(P("aug.tsv")), Slurp(D("toy_aug.golden.tsv")));
  EXPECT_NE(r.out.find("records=20"), std::string::npos);

  // Output tags are a superset of the input tags.
  const Manifest in = ReadManifest(D("toy.tsv"));
  const Manifest out = ReadManifest(P("aug.tsv"));
  ASSERT_EQ(in.records().size(), out.records().size());
  for (std::size_t i = 0; i < in.records().size(); ++i) {
    for (const Tag& t : in.records()[i].tags) {
      EXPECT_TRUE(out.records()[i].HasTag(t.cat)) << in.records()[i].image_id;
    }
  }
}

TEST_F(CliTest, AugmentTwiceIsAFixpoint) {
  ASSERT_EQ(Run({"augment", "--manifest", D("toy.tsv"), "--taxonomy", D("toy.tax"), "--pairs",
                 D("toy.pairs"), "--out", P("once.tsv")}).code,
            0);
  ASSERT_EQ(Run({"augment", "--manifest", P("once.tsv"), "--taxonomy", D("toy.tax"), "--pairs",
                 D("toy.pairs"), "--out", P("twice.tsv")}).code,
            0);
  EXPECT_EQ(Slurp(P("once.tsv")), Slurp(P("twice.tsv")));
}

TEST_F(CliTest, MachineScoreAugmentMatchesGoldens) {
  const Result r = Run({"augment", "--manifest", D("toy.tsv"), "--taxonomy", D("toy.tax"),
                        "--machine-scores", D("toy_scores.tsv"), "--co-out", P("co.tsv"),
                        "--pairs-out", P("pairs.txt"), "--shards", "3", "--out", P("aug.tsv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(Slurp(P("aug.tsv")), Slurp(D("toy_aug_machine.golden.tsv")));
  EXPECT_EQ(Slurp(P("pairs.txt")), Slurp(D("toy_pairs_machine.golden")));
}

TEST_F(CliTest, EvalMatchesMetricsOracle) {
  const Result r = Run({"eval", "--labels", D("toy_aug.golden.tsv"), "--scores",
                        D("toy_pred.tsv"), "--k", "1,5", "--per-instance", P("pi.csv")});
  ASSERT_EQ(r.code, 0) << r.err;

  // Oracle over the same files.
  const Manifest labels = ReadManifest(D("toy_aug.golden.tsv"));
  const Manifest scores = ReadManifest(D("toy_pred.tsv"));
  std::vector<std::vector<int>> y;
  std::vector<std::vector<double>> s;
  for (std::size_t i = 0; i < labels.records().size(); ++i) {
    y.emplace_back(12, 0);
    s.emplace_back(12, 0.0);
    for (const Tag& t : labels.records()[i].tags) y.back()[Value(t.cat)] = 1;
    for (const Tag& t : scores.records()[i].tags) s.back()[Value(t.cat)] = t.confidence;
  }
  for (std::size_t k : {1u, 5u}) {
    const testing::BruteMetrics want = testing::BruteInstanceMetrics(y, s, k, true);
    EvalResult er;
    er.k = k;
    er.precision = want.precision;
    er.recall = want.recall;
    er.f1 = want.f1;
    er.n_instances = want.counted;
    er.n_excluded = y.size() - want.counted;
    EXPECT_NE(r.out.find(RenderEvalRow(er)), std::string::npos) << r.out;
  }
  EXPECT_EQ(Slurp(P("pi.csv")).substr(0, 30).find("k,image_id,precision"), 0u);
}

TEST_F(CliTest, ExitCodesAndErrorPrefixes) {
  Result r = Run({});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("augment"), std::string::npos);

  r = Run({"augment", "--manifest", D("toy.tsv")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_EQ(r.err.rfind("E:cli:usage", 0), 0u) << r.err;

  r = Run({"eval", "--labels", D("toy.tsv"), "--scores", D("toy_pred.tsv"), "--bogus", "1"});
  EXPECT_EQ(r.code, kExitUsage);

  r = Run({"frobnicate"});
  EXPECT_EQ(r.code, kExitUsage);

  r = Run({"taxonomy-stats", "--taxonomy", P("missing.tax")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_EQ(r.err.rfind("E:", 0), 0u) << r.err;

  Spit(P("cycle.tax"), "0\t1\tx\ta\n1\t0\ty\tb\n");
  r = Run({"taxonomy-stats", "--taxonomy", P("cycle.tax")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_EQ(r.err.rfind("E:taxonomy:cycle", 0), 0u) << r.err;

  r = Run({"eval", "--labels", D("toy.tsv"), "--scores", D("toy_pred.tsv"), "--k", "13"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_EQ(r.err.rfind("E:metrics:k-range", 0), 0u) << r.err;

  // A learning rate large enough to overflow the parameters.
  ASSERT_EQ(Run({"synth", "--images", "32", "--seed", "1", "--out", P("s.tsv")}).code, 0);
  Spit(P("hot.cfg"), "ref_lr=1e300\nref_batch=8\nbatch=8\nwarmup_epochs=0\n");
  r = Run({"train", "--manifest", P("s.tsv"), "--config", P("hot.cfg"), "--steps", "20",
           "--out", P("m.ckpt")});
  EXPECT_EQ(r.code, kExitNumerical);
  EXPECT_EQ(r.err.rfind("E:trainer:non-finite", 0), 0u) << r.err;
}

TEST_F(CliTest, EverySubcommandHasHelp) {
  for (const char* cmd : {"taxonomy-stats", "augment", "curate", "stats", "preprocess", "train",
                          "finetune", "eval", "distsim", "synth"}) {
    const Result r = Run({cmd, "--help"});
    EXPECT_EQ(r.code, kExitOk) << cmd;
    EXPECT_NE((r.out + r.err).find("--"), std::string::npos) << cmd;
  }
}

TEST_F(CliTest, TaxonomyAndStatsReports) {
  Result r = Run({"taxonomy-stats", "--taxonomy", D("toy.tax")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("categories=12\n", 0), 0u) << r.out;

  r = Run({"stats", "--manifest", D("toy_aug.golden.tsv"), "--trainable-threshold", "3", "--log2",
           "--per-category-out", P("cats.csv"), "--tags-per-image-out", P("tags.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(Slurp(P("cats.csv")).empty());
  EXPECT_FALSE(Slurp(P("tags.csv")).empty());
}

TEST_F(CliTest, SeededCommandsAreReplayable) {
  auto run_all = [&](const std::string& tag) {
    const std::string m = P(tag + "synth.tsv");
    EXPECT_EQ(Run({"synth", "--images", "96", "--categories", "3", "--seed", "4", "--out", m}).code,
              0);
    EXPECT_EQ(Run({"curate", "--manifest", m, "--min-count", "1", "--val-out",
                   P(tag + "val.tsv"), "--val-size", "12", "--seed", "4", "--out",
                   P(tag + "train.tsv")})
                  .code,
              0);
    Spit(P("run.cfg"), "batch=16\nref_batch=16\nref_lr=0.2\nsteps_per_epoch=5\n");
    EXPECT_EQ(Run({"train", "--manifest", P(tag + "train.tsv"), "--config", P("run.cfg"),
                   "--steps", "30", "--seed", "4", "--out", P(tag + "m.ckpt"), "--loss-log",
                   P(tag + "loss.csv")})
                  .code,
              0);
    EXPECT_EQ(Run({"finetune", "--checkpoint", P(tag + "m.ckpt"), "--manifest",
                   P(tag + "val.tsv"), "--config", P("run.cfg"), "--steps", "10", "--seed",
                   "4", "--out", P(tag + "ft.ckpt")})
                  .code,
              0);
    EXPECT_EQ(Run({"distsim", "--manifest", P(tag + "train.tsv"), "--workers", "2", "--batch",
                   "8", "--steps", "10", "--seed", "4", "--config", P("run.cfg"), "--out",
                   P(tag + "d.ckpt"), "--divergence-log", P(tag + "div.csv")})
                  .code,
              0);
    Spit(P("img.ras"), "2 3 3\n0 10 20 30 40 50 60 70 80\n90 100 110 120 130 140 150 160 170\n");
    EXPECT_EQ(Run({"preprocess", "--in", P("img.ras"), "--out", P(tag + "pp.ras"),
                   "--preprocess-seed", "4", "--out-size", "3"})
                  .code,
              0);
  };
  run_all("a_");
  run_all("b_");
  for (const char* f : {"synth.tsv", "val.tsv", "train.tsv", "m.ckpt", "loss.csv", "ft.ckpt",
                        "d.ckpt", "div.csv", "pp.ras"}) {
    const std::string a = Slurp(P(std::string("a_") + f));
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, Slurp(P(std::string("b_") + f))) << f;
  }
}

TEST_F(CliTest, CurateAugmentTrainEvalPipeline) {
  ASSERT_EQ(Run({"synth", "--images", "300", "--categories", "4", "--dim", "8", "--seed", "2",
                 "--out", P("all.tsv")}).code,
            0);
  ASSERT_EQ(Run({"curate", "--manifest", P("all.tsv"), "--min-count", "5", "--val-out",
                 P("val.tsv"), "--val-size", "60", "--val-cap", "60", "--seed", "2", "--out",
                 P("train.tsv")})
                .code,
            0);
  // Category 4 is an umbrella over 0..3, so propagation tags every image with it.
  Spit(P("syn.tax"),
       "4\t-1\tu\tumbrella\n0\t4\ta\tzero\n1\t4\tb\tone\n2\t4\tc\ttwo\n3\t4\td\tthree\n");
  Spit(P("none.pairs"), "");
  for (const char* split : {"train", "val"}) {
    const Result r = Run({"augment", "--manifest", P(std::string(split) + ".tsv"), "--taxonomy",
                          P("syn.tax"), "--pairs", P("none.pairs"), "--out",
                          P(std::string(split) + "_aug.tsv")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  Spit(P("run.cfg"),
       "batch=240\nref_batch=240\nref_lr=1.0\nwarmup_epochs=0\nsteps_per_epoch=10\nhidden=16\n");
  Result r = Run({"train", "--manifest", P("train_aug.tsv"), "--config", P("run.cfg"), "--steps",
                  "300", "--seed", "2", "--out", P("m.ckpt")});
  ASSERT_EQ(r.code, 0) << r.err;
  r = Run({"eval", "--labels", P("val_aug.tsv"), "--checkpoint", P("m.ckpt"), "--k", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = r.out.find("k=1 precision=");
  ASSERT_NE(pos, std::string::npos) << r.out;
  // The umbrella tag is present on every image; a trained model ranks it first.
  EXPECT_GT(std::stod(r.out.substr(pos + 14)), 0.9) << r.out;
}

TEST(CliBinary, NoArgumentsPrintsUsageAndExitsOne) {
  const std::string cmd = std::string("\"") + MLFORGE_CLI_PATH + "\" > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 1);
  const std::string help = std::string("\"") + MLFORGE_CLI_PATH + "\" --help > /dev/null 2>&1";
  EXPECT_EQ(WEXITSTATUS(std::system(help.c_str())), 0);
}

}  // namespace
}  // namespace mlforge
