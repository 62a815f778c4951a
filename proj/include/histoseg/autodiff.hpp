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

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "histoseg/tensor.hpp"

namespace histoseg {

using Gradients = std::map<std::string, Tensor>;

/// Records a computation over NCHW tensors and replays it backwards.
///
/// Every op appends a node holding its value; nodes that depend on a
/// gradient-tracking leaf also track a gradient. backward() seeds one node
/// and runs the recorded adjoints in reverse order. Leaves are copies, so the
/// caller's tensors are never touched.
class Tape {
 public:
  struct Var {
    std::size_t id = 0;
  };

  Var input(Tensor value, bool requires_grad = false);
  /// A named gradient-tracking leaf; its gradient is reported by parameter_grads().
  Var parameter(std::string name, Tensor value);

  /// Same-padded 2-D convolution, stride 1. x [N,Ci,H,W], w [Co,Ci,K,K] with
  /// odd K, b [Co].
  Var conv2d(Var x, Var w, Var b);
  Var relu(Var x);
  /// 2x2 window, stride 2; ties go to the first element in row-major order.
  Var max_pool2(Var x);
  /// Nearest-neighbour upsampling by 2 in both spatial axes.
  Var upsample2(Var x);
  /// Channel-axis concatenation of equal N, H, W.
  Var concat(Var a, Var b);
  /// Softmax over the channel axis, computed with max subtraction.
  Var softmax(Var x);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  /// Accumulated gradient; empty before backward() or for untracked nodes.
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }

  /// Seeds d(loss)/d(output) = seed and back-propagates. Throws NoTape when
  /// nothing was recorded or the tape has already been replayed.
  void backward(Var output, const Tensor& seed);

  Gradients parameter_grads() const;

  bool recorded() const noexcept { return !nodes_.empty(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::string parameter_name;
  };

  Var push(Tensor value, bool requires_grad);
  Tensor& grad_buffer(Var v);
  bool tracks(Var v) const { return nodes_[v.id].requires_grad; }

  std::vector<Node> nodes_;
  std::vector<std::function<void(Tape&)>> adjoints_;
  bool replayed_ = false;
};

}  // namespace histoseg
