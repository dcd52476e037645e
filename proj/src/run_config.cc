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

#include "mlforge/run_config.h"

#include <fstream>
#include <map>

#include "mlforge/error.h"
#include "mlforge/text.h"

namespace mlforge {

void RunConfig::Validate() const {
  schedule.Validate();
  loss.Validate();
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw UsageError("config", "momentum", "momentum must lie in [0,1)");
  }
  if (!(weight_decay >= 0.0)) {
    throw UsageError("config", "weight_decay", "weight_decay must be non-negative");
  }
  if (!groups.empty() && groups.size() != hidden.size() + 1) {
    throw UsageError("config", "groups", "groups needs one name per stage");
  }
}

RunConfig ParseRunConfig(std::istream& in) {
  RunConfig cfg;
  cfg.schedule.group_multipliers.clear();
  bool saw_group = false;
  const std::map<std::string, double*> reals = {
      {"ref_lr", &cfg.schedule.ref_lr},
      {"ref_batch", &cfg.schedule.ref_batch},
      {"warmup_epochs", &cfg.schedule.warmup_epochs},
      {"warmup_start", &cfg.schedule.warmup_start},
      {"warmup_factor", &cfg.schedule.warmup_factor},
      {"decay_factor", &cfg.schedule.decay_factor},
      {"decay_every_epochs", &cfg.schedule.decay_every_epochs},
      {"max_epochs", &cfg.schedule.max_epochs},
      {"poly_power", &cfg.schedule.poly_power},
      {"eta", &cfg.loss.eta},
      {"skip_prob", &cfg.loss.skip_prob},
      {"clamp_eps", &cfg.loss.clamp_eps},
      {"momentum", &cfg.momentum},
      {"weight_decay", &cfg.weight_decay},
  };
  const std::map<std::string, std::size_t*> counts = {
      {"batch", &cfg.schedule.batch},
      {"steps_per_epoch", &cfg.schedule.steps_per_epoch},
      {"neg_ratio", &cfg.loss.neg_ratio},
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = Trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    auto fail = [&](const std::string& why) {
      return UsageError("config", "parse", "line " + std::to_string(line_no) + ": " + why);
    };
    if (eq == std::string_view::npos) throw fail("expected key=value");
    const std::string key(Trim(view.substr(0, eq)));
    const std::string_view value = Trim(view.substr(eq + 1));

    auto real = [&]() {
      auto v = ParseReal(value);
      if (!v) throw fail("bad number for " + key);
      return *v;
    };
    auto count = [&]() {
      auto v = ParseUnsigned<std::size_t>(value);
      if (!v) throw fail("bad integer for " + key);
      return *v;
    };

    if (key.starts_with("group.")) {
      cfg.schedule.group_multipliers[key.substr(6)] = real();
      saw_group = true;
      continue;
    }
    if (auto it = reals.find(key); it != reals.end()) {
      *it->second = real();
    } else if (auto jt = counts.find(key); jt != counts.end()) {
      *jt->second = count();
    } else if (key == "policy") {
      if (value == "step") {
        cfg.schedule.policy = LrPolicy::kStep;
      } else if (value == "poly") {
        cfg.schedule.policy = LrPolicy::kPoly;
      } else {
        throw fail("policy must be 'step' or 'poly'");
      }
    } else if (key == "hidden") {
      cfg.hidden.clear();
      if (!value.empty()) {
        for (std::string_view item : SplitString(value, ',')) {
          auto v = ParseUnsigned<std::size_t>(Trim(item));
          if (!v || *v == 0) throw fail("bad hidden width '" + std::string(item) + "'");
          cfg.hidden.push_back(*v);
        }
      }
    } else if (key == "groups") {
      cfg.groups.clear();
      for (std::string_view item : SplitString(value, ',')) {
        cfg.groups.emplace_back(Trim(item));
      }
    } else {
      throw fail("unknown key '" + key + "'");
    }
  }
  if (!saw_group) cfg.schedule.group_multipliers = ScheduleConfig{}.group_multipliers;
  cfg.Validate();
  return cfg;
}

RunConfig ReadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config", "io", "cannot open " + path.string());
  return ParseRunConfig(in);
}

void WriteRunConfig(const RunConfig& c, std::ostream& out) {
  const ScheduleConfig& s = c.schedule;
  out << "ref_lr=" << FormatShortest(s.ref_lr) << '\n'
      << "ref_batch=" << FormatShortest(s.ref_batch) << '\n'
      << "batch=" << s.batch << '\n'
      << "warmup_epochs=" << FormatShortest(s.warmup_epochs) << '\n'
      << "warmup_start=" << FormatShortest(s.warmup_start) << '\n'
      << "warmup_factor=" << FormatShortest(s.warmup_factor) << '\n'
      << "decay_factor=" << FormatShortest(s.decay_factor) << '\n'
      << "decay_every_epochs=" << FormatShortest(s.decay_every_epochs) << '\n'
      << "max_epochs=" << FormatShortest(s.max_epochs) << '\n'
      << "policy=" << (s.policy == LrPolicy::kStep ? "step" : "poly") << '\n'
      << "poly_power=" << FormatShortest(s.poly_power) << '\n'
      << "steps_per_epoch=" << s.steps_per_epoch << '\n';
  for (const auto& [group, mult] : s.group_multipliers) {
    out << "group." << group << '=' << FormatShortest(mult) << '\n';
  }
  out << "eta=" << FormatShortest(c.loss.eta) << '\n'
      << "neg_ratio=" << c.loss.neg_ratio << '\n'
      << "skip_prob=" << FormatShortest(c.loss.skip_prob) << '\n'
      << "clamp_eps=" << FormatShortest(c.loss.clamp_eps) << '\n'
      << "momentum=" << FormatShortest(c.momentum) << '\n'
      << "weight_decay=" << FormatShortest(c.weight_decay) << '\n';
  out << "hidden=";
  for (std::size_t i = 0; i < c.hidden.size(); ++i) out << (i ? "," : "") << c.hidden[i];
  out << '\n';
  if (!c.groups.empty()) {
    out << "groups=";
    for (std::size_t i = 0; i < c.groups.size(); ++i) out << (i ? "," : "") << c.groups[i];
    out << '\n';
  }
}

}  // namespace mlforge
