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

#include "histoseg/losses.hpp"

#include <cmath>
#include <vector>

#include "histoseg/errors.hpp"

namespace histoseg {

namespace {

constexpr std::string_view kModule = "trainer";

void require_pair(const Tensor& probs, const Tensor& onehot) {
  if (probs.rank() != 4 || !probs.same_shape(onehot)) {
    throw Error(kModule, ErrorCode::ShapeMismatch,
                "loss inputs " + shape_string(probs.shape()) + " and " + shape_string(onehot.shape()));
  }
}

}  // namespace

void TverskyParams::validate() const {
  if (alpha < 0.0 || beta < 0.0 || !(smooth > 0.0) || smooth > 1e-3) {
    throw Error(kModule, ErrorCode::BadConfig, "tversky needs alpha, beta >= 0 and 0 < smooth <= 1e-3");
  }
}

LossResult tversky_loss(const Tensor& probs, const Tensor& onehot, const TverskyParams& params) {
  require_pair(probs, onehot);
  params.validate();
  const int n_batch = probs.dim(0), classes = probs.dim(1);
  const std::size_t plane = static_cast<std::size_t>(probs.dim(2)) * probs.dim(3);

  std::vector<double> tp(classes, 0.0), fn(classes, 0.0), fp(classes, 0.0);
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < classes; ++c) {
      const double* p = &probs.at(n, c, 0, 0);
      const double* g = &onehot.at(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) {
        tp[c] += p[i] * g[i];
        fn[c] += (1.0 - p[i]) * g[i];
        fp[c] += p[i] * (1.0 - g[i]);
      }
    }
  }

  LossResult out{static_cast<double>(classes), Tensor(probs.shape(), 0.0)};
  for (int c = 0; c < classes; ++c) {
    const double num = tp[c] + params.smooth;
    const double den = tp[c] + params.alpha * fn[c] + params.beta * fp[c] + params.smooth;
    out.value -= num / den;
    // d TI / d p at a pixel with label g:
    //   dTP = g, dFN = -g, dFP = 1 - g
    //   dTI = (dTP * den - num * (dTP - alpha g + beta (1 - g))) / den^2
    const double inv_den2 = 1.0 / (den * den);
    const double d_on = (den - num * (1.0 - params.alpha)) * inv_den2;  // g = 1
    const double d_off = (-num * params.beta) * inv_den2;               // g = 0
    for (int n = 0; n < n_batch; ++n) {
      const double* g = &onehot.at(n, c, 0, 0);
      double* dst = &out.grad.at(n, c, 0, 0);
      for (std::size_t i = 0; i < plane; ++i) dst[i] = -(g[i] * d_on + (1.0 - g[i]) * d_off);
    }
  }
  return out;
}

LossResult crossentropy_loss(const Tensor& probs, const Tensor& onehot) {
  require_pair(probs, onehot);
  const double count = static_cast<double>(probs.dim(0)) * probs.dim(2) * probs.dim(3);
  LossResult out{0.0, Tensor(probs.shape(), 0.0)};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (onehot[i] == 0.0) continue;
    const double p = probs[i];
    if (p > kCrossEntropyEpsilon) {
      out.value -= onehot[i] * std::log(p);
      out.grad[i] = -onehot[i] / (p * count);
    } else {
      out.value -= onehot[i] * std::log(kCrossEntropyEpsilon);
    }
  }
  out.value /= count;
  return out;
}

LossResult combined_loss(const Tensor& probs, const Tensor& onehot, const TverskyParams& params) {
  LossResult t = tversky_loss(probs, onehot, params);
  const LossResult ce = crossentropy_loss(probs, onehot);
  t.value += ce.value;
  for (std::size_t i = 0; i < t.grad.size(); ++i) t.grad[i] += ce.grad[i];
  return t;
}

}  // namespace histoseg
