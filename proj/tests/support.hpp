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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "histoseg/mask_codec.hpp"
#include "histoseg/rng.hpp"
#include "histoseg/tensor.hpp"

namespace histoseg::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device entropy;
    path_ = std::filesystem::temp_directory_path() /
            ("histoseg_" + tag + "_" + std::to_string(entropy()) + std::to_string(entropy()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline RawMask random_raw_mask(SplitMix64& rng, int h, int w, int id_range = 6) {
  RawMask m{ByteRaster(h, w), ByteRaster(h, w), ByteRaster(h, w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      m.ch1.at(y, x) = static_cast<std::uint8_t>(rng.below(id_range));
      m.ch2.at(y, x) = static_cast<std::uint8_t>(rng.below(256));
      m.ch3.at(y, x) = static_cast<std::uint8_t>(rng.below(256));
    }
  }
  return m;
}

inline ClassMap random_class_map(SplitMix64& rng, int h, int w) {
  ClassMap m(h, w);
  for (auto& v : m.data()) v = static_cast<Superclass>(rng.below(kSuperclassCount));
  return m;
}

/// Softmax of standard normals along axis 1 of an NCHW shape.
inline Tensor random_probs(SplitMix64& rng, const std::vector<int>& shape) {
  Tensor t(shape);
  for (int n = 0; n < shape[0]; ++n) {
    for (int y = 0; y < shape[2]; ++y) {
      for (int x = 0; x < shape[3]; ++x) {
        double sum = 0.0;
        for (int c = 0; c < shape[1]; ++c) sum += t.at(n, c, y, x) = std::exp(rng.normal());
        for (int c = 0; c < shape[1]; ++c) t.at(n, c, y, x) /= sum;
      }
    }
  }
  return t;
}

inline Tensor random_onehot(SplitMix64& rng, const std::vector<int>& shape) {
  Tensor t(shape);
  for (int n = 0; n < shape[0]; ++n) {
    for (int y = 0; y < shape[2]; ++y) {
      for (int x = 0; x < shape[3]; ++x) t.at(n, static_cast<int>(rng.below(shape[1])), y, x) = 1.0;
    }
  }
  return t;
}

inline Tensor random_normal(SplitMix64& rng, const std::vector<int>& shape, double scale = 1.0) {
  Tensor t(shape);
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

/// |a - b| / max(|a|, |b|, floor).
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of f at x[i] with step h; x is restored afterwards.
inline double central_difference(const std::function<double(const Tensor&)>& f, Tensor& x,
                                 std::size_t i, double h) {
  const double saved = x[i];
  x[i] = saved + h;
  const double up = f(x);
  x[i] = saved - h;
  const double down = f(x);
  x[i] = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace histoseg::testing
