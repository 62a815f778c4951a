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

#include "histoseg/unet.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "histoseg/errors.hpp"
#include "histoseg/rng.hpp"

namespace histoseg {

namespace {

constexpr std::string_view kModule = "nn_core";
constexpr char kCheckpointMagic[4] = {'H', 'S', 'N', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(kModule, ErrorCode::FormatError, "truncated checkpoint");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

Tensor he_kernel(int out_ch, int in_ch, int k, SplitMix64& rng) {
  Tensor w({out_ch, in_ch, k, k});
  const double std_dev = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
  for (double& v : w.values()) v = std_dev * rng.normal();
  return w;
}

struct ConvVars {
  Tape::Var w;
  Tape::Var b;
};

}  // namespace

void NetworkConfig::validate() const {
  if (depth < 1 || base_filters < 1 || in_channels < 1 || n_classes < 2) {
    throw Error(kModule, ErrorCode::BadConfig,
                "network needs depth >= 1, base_filters >= 1, in_channels >= 1, n_classes >= 2");
  }
  if (kernel != 3) throw Error(kModule, ErrorCode::BadConfig, "kernel is fixed at 3");
  if (depth > 16) throw Error(kModule, ErrorCode::BadConfig, "depth too large");
}

void NetworkConfig::validate_input_side(int side) const {
  const int factor = 1 << depth;
  if (side <= 0 || side % factor != 0) {
    throw Error(kModule, ErrorCode::BadConfig,
                "input side " + std::to_string(side) + " is not divisible by 2^depth = " +
                    std::to_string(factor));
  }
}

Tensor& Network::parameter(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p.value;
  }
  throw Error(kModule, ErrorCode::BadConfig, "no parameter named " + std::string(name));
}

const Tensor& Network::parameter(std::string_view name) const {
  return const_cast<Network*>(this)->parameter(name);
}

void Network::add_parameter(std::string name, Tensor value) {
  params_.push_back(NamedParameter{std::move(name), std::move(value)});
}

std::size_t Network::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool operator==(const Network& a, const Network& b) {
  if (!(a.config_ == b.config_) || a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) {
      return false;
    }
  }
  return true;
}

Network build_unet(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Network net(config);
  SplitMix64 rng(seed);
  const int k = config.kernel;
  auto conv = [&](const std::string& name, int in_ch, int out_ch, int ksize) {
    net.add_parameter(name + ".weight", he_kernel(out_ch, in_ch, ksize, rng));
    net.add_parameter(name + ".bias", Tensor({out_ch}, 0.0));
  };

  int channels = config.in_channels;
  for (int level = 0; level < config.depth; ++level) {
    const int f = config.base_filters << level;
    conv("enc" + std::to_string(level) + ".conv1", channels, f, k);
    conv("enc" + std::to_string(level) + ".conv2", f, f, k);
    channels = f;
  }
  const int bottom = config.base_filters << config.depth;
  conv("bottleneck.conv1", channels, bottom, k);
  conv("bottleneck.conv2", bottom, bottom, k);
  channels = bottom;
  for (int level = config.depth - 1; level >= 0; --level) {
    const int f = config.base_filters << level;
    const std::string prefix = "dec" + std::to_string(level);
    conv(prefix + ".up", channels, f, k);
    conv(prefix + ".conv1", 2 * f, f, k);
    conv(prefix + ".conv2", f, f, k);
    channels = f;
  }
  conv("head", channels, config.n_classes, 1);
  return net;
}

ForwardPass forward(const Network& net, const Tensor& batch) {
  const auto& cfg = net.config();
  if (batch.rank() != 4 || batch.dim(1) != cfg.in_channels || batch.dim(2) != batch.dim(3)) {
    throw Error(kModule, ErrorCode::ShapeMismatch,
                "forward expects [N," + std::to_string(cfg.in_channels) + ",S,S], got " +
                    shape_string(batch.shape()));
  }
  cfg.validate_input_side(batch.dim(2));

  ForwardPass pass;
  Tape& tape = pass.tape;
  std::map<std::string, Tape::Var, std::less<>> vars;
  for (const auto& p : net.parameters()) vars.emplace(p.name, tape.parameter(p.name, p.value));
  auto conv = [&](Tape::Var x, const std::string& name) {
    return tape.conv2d(x, vars.at(name + ".weight"), vars.at(name + ".bias"));
  };
  auto block = [&](Tape::Var x, const std::string& prefix) {
    x = tape.relu(conv(x, prefix + ".conv1"));
    return tape.relu(conv(x, prefix + ".conv2"));
  };

  Tape::Var x = tape.input(batch);
  std::vector<Tape::Var> skips;
  for (int level = 0; level < cfg.depth; ++level) {
    x = block(x, "enc" + std::to_string(level));
    skips.push_back(x);
    x = tape.max_pool2(x);
  }
  x = block(x, "bottleneck");
  for (int level = cfg.depth - 1; level >= 0; --level) {
    const std::string prefix = "dec" + std::to_string(level);
    x = tape.relu(conv(tape.upsample2(x), prefix + ".up"));
    x = tape.concat(skips[static_cast<std::size_t>(level)], x);
    x = block(x, prefix);
  }
  pass.output = tape.softmax(conv(x, "head"));
  pass.probs = tape.value(pass.output);
  return pass;
}

Gradients backward(ForwardPass& pass, const Tensor& loss_grad) {
  pass.tape.backward(pass.output, loss_grad);
  return pass.tape.parameter_grads();
}

namespace {

const Tensor& grad_for(const Gradients& grads, const NamedParameter& p) {
  const auto it = grads.find(p.name);
  if (it == grads.end()) {
    throw Error(kModule, ErrorCode::MissingGrad, "no gradient for parameter " + p.name);
  }
  if (!it->second.same_shape(p.value)) {
    throw Error(kModule, ErrorCode::ShapeMismatch, "gradient shape mismatch for " + p.name);
  }
  return it->second;
}

}  // namespace

void sgd_step(Network& net, const Gradients& grads, double lr) {
  for (const auto& p : net.parameters()) grad_for(grads, p);
  for (auto& p : net.parameters()) {
    const Tensor& g = grads.at(p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= lr * g[i];
  }
}

void SgdOptimizer::step(Network& net, const Gradients& grads, double lr) {
  if (momentum_ == 0.0) {
    sgd_step(net, grads, lr);
    return;
  }
  for (const auto& p : net.parameters()) grad_for(grads, p);
  for (auto& p : net.parameters()) {
    const Tensor& g = grads.at(p.name);
    auto [it, inserted] = velocity_.try_emplace(p.name, p.value.shape(), 0.0);
    Tensor& v = it->second;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      v[i] = momentum_ * v[i] + g[i];
      p.value[i] -= lr * v[i];
    }
  }
}

void AdamOptimizer::step(Network& net, const Gradients& grads, double lr) {
  for (const auto& p : net.parameters()) grad_for(grads, p);
  ++step_count_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (auto& p : net.parameters()) {
    const Tensor& g = grads.at(p.name);
    Tensor& m = first_.try_emplace(p.name, p.value.shape(), 0.0).first->second;
    Tensor& v = second_.try_emplace(p.name, p.value.shape(), 0.0).first->second;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon_);
    }
  }
}

std::vector<std::uint8_t> encode_checkpoint(const Network& net) {
  const auto& cfg = net.config();
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  for (int v : {cfg.depth, cfg.base_filters, cfg.in_channels, cfg.n_classes, cfg.kernel}) {
    put_u32(out, static_cast<std::uint32_t>(v));
  }
  put_u32(out, static_cast<std::uint32_t>(net.parameters().size()));
  for (const auto& p : net.parameters()) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : p.value.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

Network decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw Error(kModule, ErrorCode::FormatError, "not an HSN1 checkpoint");
  }
  Reader in(bytes.subspan(4));
  NetworkConfig cfg;
  cfg.depth = static_cast<int>(in.u32());
  cfg.base_filters = static_cast<int>(in.u32());
  cfg.in_channels = static_cast<int>(in.u32());
  cfg.n_classes = static_cast<int>(in.u32());
  cfg.kernel = static_cast<int>(in.u32());
  cfg.validate();
  Network net(cfg);
  const std::uint32_t count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.text(in.u32());
    const std::uint32_t rank = in.u32();
    if (rank > 8) throw Error(kModule, ErrorCode::FormatError, "implausible rank in checkpoint");
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(in.u32());
    Tensor t(shape);
    for (double& v : t.values()) v = std::bit_cast<float>(in.u32());
    net.add_parameter(std::move(name), std::move(t));
  }
  if (!in.done()) throw Error(kModule, ErrorCode::FormatError, "trailing bytes in checkpoint");
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  const auto bytes = encode_checkpoint(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(kModule, ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(kModule, ErrorCode::IoError, "cannot read " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes);
}

}  // namespace histoseg
