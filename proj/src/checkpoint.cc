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

#include "mlforge/checkpoint.h"

#include <fstream>
#include <sstream>
#include <string>

#include "mlforge/error.h"
#include "mlforge/text.h"

namespace mlforge {
namespace {

Error Corrupt(const std::string& why) {
  return DataError("checkpoint", "parse", why);
}

void WriteValues(std::ostream& out, const char* tag, const double* data,
                 Eigen::Index n) {
  out << tag;
  for (Eigen::Index i = 0; i < n; ++i) out << ' ' << FormatShortest(data[i]);
  out << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string Word() {
    std::string w;
    if (!(in_ >> w)) throw Corrupt("unexpected end of checkpoint");
    return w;
  }

  void Expect(const std::string& word) {
    const std::string got = Word();
    if (got != word) throw Corrupt("expected '" + word + "', found '" + got + "'");
  }

  std::uint64_t Count() {
    const std::string w = Word();
    auto v = ParseUnsigned<std::uint64_t>(w);
    if (!v) throw Corrupt("bad integer '" + w + "'");
    return *v;
  }

  double Real() {
    const std::string w = Word();
    auto v = ParseReal(w);
    if (!v) throw Corrupt("bad real '" + w + "'");
    return *v;
  }

  void Values(const std::string& tag, double* data, Eigen::Index n) {
    Expect(tag);
    for (Eigen::Index i = 0; i < n; ++i) data[i] = Real();
  }

 private:
  std::istream& in_;
};

const char* ActivationName(Activation a) {
  return a == Activation::kTanh ? "tanh" : "identity";
}

}  // namespace

void WriteCheckpoint(const Checkpoint& ckpt, std::ostream& out) {
  const Model& model = ckpt.model;
  out << "mlforge-checkpoint " << kCheckpointVersion << '\n';
  out << "head " << (model.head() == HeadKind::kSigmoid ? "sigmoid" : "softmax") << '\n';
  out << "columns " << ckpt.columns.size();
  for (CatId c : ckpt.columns) out << ' ' << Value(c);
  out << '\n';
  out << "stages " << model.stages().size() << '\n';
  for (const Stage& s : model.stages()) {
    out << "stage " << s.group << ' ' << ActivationName(s.activation) << ' '
        << s.output_dim() << ' ' << s.input_dim() << '\n';
    WriteValues(out, "weight", s.weight.data(), s.weight.size());
    WriteValues(out, "bias", s.bias.data(), s.bias.size());
  }
  const OptimizerState& opt = ckpt.optimizer;
  out << "optimizer " << FormatShortest(opt.momentum) << ' '
      << FormatShortest(opt.weight_decay) << ' ' << opt.step << ' ' << opt.epoch << '\n';
  for (std::size_t s = 0; s < model.stages().size(); ++s) {
    const bool have = s < opt.velocity.weight.size();
    const Stage& st = model.stages()[s];
    Matrix vw = have ? opt.velocity.weight[s] : Matrix::Zero(st.weight.rows(), st.weight.cols());
    Vector vb = have ? opt.velocity.bias[s] : Vector::Zero(st.bias.size());
    WriteValues(out, "velocity_weight", vw.data(), vw.size());
    WriteValues(out, "velocity_bias", vb.data(), vb.size());
  }
  out << "adaptive " << ckpt.adaptive.size() << '\n';
  for (std::size_t j = 0; j < ckpt.adaptive.size(); ++j) {
    const auto prev = ckpt.adaptive.prev_status(j);
    out << (prev ? (*prev ? "1" : "0") : "-") << ' ' << ckpt.adaptive.t(j) << '\n';
  }
  out << "end\n";
}

void WriteCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("checkpoint", "io", "cannot write " + path.string());
  WriteCheckpoint(ckpt, out);
}

Checkpoint ParseCheckpoint(std::istream& in) {
  Reader r(in);
  r.Expect("mlforge-checkpoint");
  const auto version = r.Count();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint", "version",
                    "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  r.Expect("head");
  const std::string head_name = r.Word();
  if (head_name != "sigmoid" && head_name != "softmax") throw Corrupt("unknown head " + head_name);
  const HeadKind head = head_name == "sigmoid" ? HeadKind::kSigmoid : HeadKind::kSoftmax;
  r.Expect("columns");
  const auto n_columns = r.Count();
  for (std::uint64_t i = 0; i < n_columns; ++i) {
    ckpt.columns.push_back(CatId{static_cast<std::uint32_t>(r.Count())});
  }
  r.Expect("stages");
  const auto n_stages = r.Count();
  std::vector<Stage> stages;
  for (std::uint64_t s = 0; s < n_stages; ++s) {
    r.Expect("stage");
    Stage st;
    st.group = r.Word();
    const std::string act = r.Word();
    if (act != "tanh" && act != "identity") throw Corrupt("unknown activation " + act);
    st.activation = act == "tanh" ? Activation::kTanh : Activation::kIdentity;
    const auto out_dim = static_cast<Eigen::Index>(r.Count());
    const auto in_dim = static_cast<Eigen::Index>(r.Count());
    st.weight.resize(out_dim, in_dim);
    st.bias.resize(out_dim);
    r.Values("weight", st.weight.data(), st.weight.size());
    r.Values("bias", st.bias.data(), st.bias.size());
    stages.push_back(std::move(st));
  }
  ckpt.model = Model(std::move(stages), head);
  r.Expect("optimizer");
  ckpt.optimizer.momentum = r.Real();
  ckpt.optimizer.weight_decay = r.Real();
  ckpt.optimizer.step = r.Count();
  ckpt.optimizer.epoch = r.Count();
  ckpt.optimizer.velocity = Gradients::ZerosLike(ckpt.model);
  for (std::size_t s = 0; s < ckpt.model.stages().size(); ++s) {
    auto& vw = ckpt.optimizer.velocity.weight[s];
    auto& vb = ckpt.optimizer.velocity.bias[s];
    r.Values("velocity_weight", vw.data(), vw.size());
    r.Values("velocity_bias", vb.data(), vb.size());
  }
  r.Expect("adaptive");
  const auto n_adaptive = r.Count();
  ckpt.adaptive = AdaptiveWeightState(n_adaptive);
  for (std::size_t j = 0; j < n_adaptive; ++j) {
    const std::string prev = r.Word();
    std::optional<bool> status;
    if (prev == "0" || prev == "1") {
      status = prev == "1";
    } else if (prev != "-") {
      throw Corrupt("bad adaptive status '" + prev + "'");
    }
    ckpt.adaptive.Set(j, status, r.Count());
  }
  r.Expect("end");
  return ckpt;
}

Checkpoint ReadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("checkpoint", "io", "cannot open " + path.string());
  return ParseCheckpoint(in);
}

}  // namespace mlforge
