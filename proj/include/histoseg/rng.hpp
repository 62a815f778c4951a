// Copyright 2026 The histoseg Authors
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

#pragma once

#include <cstdint>
#include <initializer_list>

namespace histoseg {

/// SplitMix64 (Steele, Lea & Flood 2014). The whole pipeline draws from this
/// generator so that splits and augmentations reproduce bit-for-bit on any
/// platform and in any language:
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;

  /// Uniform in [0, 1) from the top 53 bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound) by rejection of the biased tail; bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  /// Standard normal via Box-Muller (cosine branch only, one draw pair per call).
  double normal() noexcept;

 private:
  std::uint64_t state_;
};

/// Folds several 64-bit values into one seed (each word passed through the
/// SplitMix64 finalizer). Used to derive independent streams, e.g.
/// (config seed, draw index, transform tag).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words) noexcept;

}  // namespace histoseg
