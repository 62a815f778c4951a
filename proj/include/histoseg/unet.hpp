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
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "histoseg/autodiff.hpp"
#include "histoseg/tensor.hpp"

namespace histoseg {

struct NetworkConfig {
  int depth = 2;
  int base_filters = 8;
  int in_channels = 3;
  int n_classes = 4;
  int kernel = 3;

  /// Throws BadConfig.
  void validate() const;
  /// Throws BadConfig unless side is a positive multiple of 2^depth.
  void validate_input_side(int side) const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct NamedParameter {
  std::string name;
  Tensor value;
};

/// U-Net parameters in construction order.
///
/// Encoder level l (filters base * 2^l): conv3x3 -> ReLU -> conv3x3 -> ReLU,
/// kept as the skip, then 2x2 max-pool. The bottleneck has base * 2^depth
/// filters. Decoder level l: nearest upsample x2 -> conv3x3 -> ReLU, concat
/// with skip l, then two conv3x3 -> ReLU. A 1x1 head maps to class logits and
/// a channel softmax gives probabilities.
class Network {
 public:
  Network() = default;
  explicit Network(NetworkConfig config) : config_(config) {}

  const NetworkConfig& config() const noexcept { return config_; }
  std::vector<NamedParameter>& parameters() noexcept { return params_; }
  const std::vector<NamedParameter>& parameters() const noexcept { return params_; }

  Tensor& parameter(std::string_view name);
  const Tensor& parameter(std::string_view name) const;
  void add_parameter(std::string name, Tensor value);

  /// Total scalar count over all parameter tensors.
  std::size_t parameter_count() const noexcept;

  friend bool operator==(const Network&, const Network&);

 private:
  NetworkConfig config_;
  std::vector<NamedParameter> params_;
};

/// He-normal kernels (std = sqrt(2 / fan_in)) from SplitMix64(seed); biases 0.
Network build_unet(const NetworkConfig& config, std::uint64_t seed);

struct ForwardPass {
  Tensor probs;  // [N, n_classes, S, S]
  Tape tape;
  Tape::Var output;
};

/// batch is [N, in_channels, S, S] with S divisible by 2^depth.
ForwardPass forward(const Network& net, const Tensor& batch);

/// Back-propagates d(loss)/d(probs). Consumes the tape: a second call throws NoTape.
Gradients backward(ForwardPass& pass, const Tensor& loss_grad);

/// p <- p - lr * g for every parameter. Throws MissingGrad when a parameter
/// has no gradient entry.
void sgd_step(Network& net, const Gradients& grads, double lr);

/// Heavy-ball momentum: v <- momentum * v + g; p <- p - lr * v.
/// momentum = 0 reduces to sgd_step.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(double momentum = 0.0) : momentum_(momentum) {}
  void step(Network& net, const Gradients& grads, double lr);

 private:
  double momentum_;
  std::map<std::string, Tensor> velocity_;
};

/// Adam (Kingma & Ba) with bias correction.
class AdamOptimizer {
 public:
  AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-7)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}
  void step(Network& net, const Gradients& grads, double lr);

 private:
  double beta1_;
  double beta2_;
  double epsilon_;
  long step_count_ = 0;
  std::map<std::string, Tensor> first_;
  std::map<std::string, Tensor> second_;
};

/// Checkpoint layout (little-endian):
///   "HSN1", u32 depth, u32 base_filters, u32 in_channels, u32 n_classes,
///   u32 kernel, u32 parameter count, then per parameter:
///   u32 name length, name bytes, u32 rank, rank x u32 dims, f32 values.
std::vector<std::uint8_t> encode_checkpoint(const Network& net);
Network decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace histoseg
