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

#ifndef MLFORGE_RNG_H_
#define MLFORGE_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mlforge {

// Seeded random source. The engine output sequence is fixed by the standard
// and the distributions below are implemented here rather than taken from
// <random>, so draws are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for a named consumer, e.g. Rng::Stream(seed, "split").
  static Rng Stream(std::uint64_t seed, std::string_view name);
  // Stream keyed by (seed, name, index), e.g. per worker or per image.
  static Rng Stream(std::uint64_t seed, std::string_view name,
                    std::uint64_t index);

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t Below(std::uint64_t n);

  bool Bernoulli(double p) { return Uniform() < p; }

  // Gaussian via Box-Muller (no cached second variate).
  double Normal(double mean, double stddev);

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(Below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Returns a uniformly random permutation of 0..n-1.
std::vector<std::size_t> Permutation(std::size_t n, Rng& rng);

}  // namespace mlforge

#endif  // MLFORGE_RNG_H_
