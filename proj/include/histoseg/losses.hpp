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

#include "histoseg/tensor.hpp"

namespace histoseg {

struct TverskyParams {
  double alpha = 0.5;   // weight of false negatives
  double beta = 0.5;    // weight of false positives
  double smooth = 1e-6;

  /// Throws BadConfig unless alpha, beta >= 0 and 0 < smooth <= 1e-3.
  void validate() const;
};

/// Loss value with its gradient with respect to the probabilities.
struct LossResult {
  double value = 0.0;
  Tensor grad;
};

/// Per class c, over batch and pixels:
///   TP = sum p g, FN = sum (1-p) g, FP = sum p (1-g)
///   TI_c = (TP + s) / (TP + alpha FN + beta FP + s)
/// loss = C - sum_c TI_c.
LossResult tversky_loss(const Tensor& probs, const Tensor& onehot, const TverskyParams& params);

inline constexpr double kCrossEntropyEpsilon = 1e-7;

/// Mean over batch and pixels of -sum_c g_c ln(max(p_c, 1e-7)).
LossResult crossentropy_loss(const Tensor& probs, const Tensor& onehot);

/// tversky_loss + crossentropy_loss.
LossResult combined_loss(const Tensor& probs, const Tensor& onehot, const TverskyParams& params);

}  // namespace histoseg
