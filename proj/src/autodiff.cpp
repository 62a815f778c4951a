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

#include "histoseg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "histoseg/errors.hpp"

namespace histoseg {

namespace {

constexpr std::string_view kModule = "nn_core";

void require_rank4(const Tensor& t, const char* what) {
  if (t.rank() != 4) {
    throw Error(kModule, ErrorCode::ShapeMismatch,
                std::string(what) + " expects a rank-4 tensor, got " + shape_string(t.shape()));
  }
}

// Valid output range [lo, hi) for a tap at offset d in an axis of length n.
struct Span1 {
  int lo;
  int hi;
};
Span1 valid_range(int d, int n) { return {std::max(0, -d), std::min(n, n - d)}; }

}  // namespace

Tape::Var Tape::push(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, {}});
  return Var{nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(Var v) {
  Node& node = nodes_[v.id];
  if (node.grad.empty() && !node.value.empty()) node.grad = Tensor(node.value.shape(), 0.0);
  return node.grad;
}

Tape::Var Tape::input(Tensor value, bool requires_grad) { return push(std::move(value), requires_grad); }

Tape::Var Tape::parameter(std::string name, Tensor value) {
  const Var v = push(std::move(value), true);
  nodes_[v.id].parameter_name = std::move(name);
  return v;
}

Tape::Var Tape::conv2d(Var x, Var w, Var b) {
  const Tensor& in = value(x);
  const Tensor& kernel = value(w);
  const Tensor& bias = value(b);
  require_rank4(in, "conv2d input");
  require_rank4(kernel, "conv2d kernel");
  const int n_batch = in.dim(0), ci_n = in.dim(1), h = in.dim(2), wd = in.dim(3);
  const int co_n = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != ci_n || kernel.dim(3) != k || k % 2 == 0 || bias.rank() != 1 ||
      bias.dim(0) != co_n) {
    throw Error(kModule, ErrorCode::ShapeMismatch,
                "conv2d: input " + shape_string(in.shape()) + ", kernel " +
                    shape_string(kernel.shape()) + ", bias " + shape_string(bias.shape()));
  }
  const int pad = k / 2;

  Tensor out({n_batch, co_n, h, wd});
  const std::size_t plane = static_cast<std::size_t>(h) * wd;
  for (int n = 0; n < n_batch; ++n) {
    for (int co = 0; co < co_n; ++co) {
      double* dst = &out.at(n, co, 0, 0);
      std::fill(dst, dst + plane, bias[co]);
      for (int ci = 0; ci < ci_n; ++ci) {
        const double* src = &in.at(n, ci, 0, 0);
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - pad;
          const auto ys = valid_range(dy, h);
          for (int kx = 0; kx < k; ++kx) {
            const int dx = kx - pad;
            const auto xs = valid_range(dx, wd);
            const double wv = kernel.at(co, ci, ky, kx);
            for (int y = ys.lo; y < ys.hi; ++y) {
              double* row = dst + static_cast<std::size_t>(y) * wd;
              const double* srow = src + static_cast<std::size_t>(y + dy) * wd + dx;
              for (int xx = xs.lo; xx < xs.hi; ++xx) row[xx] += wv * srow[xx];
            }
          }
        }
      }
    }
  }

  const bool track = tracks(x) || tracks(w) || tracks(b);
  const Var y = push(std::move(out), track);
  if (track) {
    adjoints_.push_back([=](Tape& t) {
      const Tensor& g = t.nodes_[y.id].grad;
      if (g.empty()) return;
      const Tensor& in = t.value(x);
      const Tensor& kernel = t.value(w);
      Tensor* gx = t.tracks(x) ? &t.grad_buffer(x) : nullptr;
      Tensor* gw = t.tracks(w) ? &t.grad_buffer(w) : nullptr;
      Tensor* gb = t.tracks(b) ? &t.grad_buffer(b) : nullptr;
      for (int n = 0; n < n_batch; ++n) {
        for (int co = 0; co < co_n; ++co) {
          const double* gout = &g.at(n, co, 0, 0);
          if (gb) {
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += gout[i];
            (*gb)[co] += acc;
          }
          for (int ci = 0; ci < ci_n; ++ci) {
            const double* src = &in.at(n, ci, 0, 0);
            double* gsrc = gx ? &gx->at(n, ci, 0, 0) : nullptr;
            for (int ky = 0; ky < k; ++ky) {
              const int dy = ky - pad;
              const auto ys = valid_range(dy, h);
              for (int kx = 0; kx < k; ++kx) {
                const int dx = kx - pad;
                const auto xs = valid_range(dx, wd);
                const double wv = kernel.at(co, ci, ky, kx);
                double acc = 0.0;
                for (int yy = ys.lo; yy < ys.hi; ++yy) {
                  const double* grow = gout + static_cast<std::size_t>(yy) * wd;
                  const std::size_t soff = static_cast<std::size_t>(yy + dy) * wd + dx;
                  const double* srow = src + soff;
                  if (gw) {
                    for (int xx = xs.lo; xx < xs.hi; ++xx) acc += grow[xx] * srow[xx];
                  }
                  if (gsrc) {
                    double* gs = gsrc + soff;
                    for (int xx = xs.lo; xx < xs.hi; ++xx) gs[xx] += wv * grow[xx];
                  }
                }
                if (gw) gw->at(co, ci, ky, kx) += acc;
              }
            }
          }
        }
      }
    });
  }
  return y;
}

Tape::Var Tape::relu(Var x) {
  const Tensor& in = value(x);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::max(in[i], 0.0);
  const bool track = tracks(x);
  const Var y = push(std::move(out), track);
  if (track) {
    adjoints_.push_back([=](Tape& t) {
      const Tensor& g = t.nodes_[y.id].grad;
      if (g.empty()) return;
      const Tensor& in = t.value(x);
      Tensor& gx = t.grad_buffer(x);
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] > 0.0) gx[i] += g[i];
      }
    });
  }
  return y;
}

Tape::Var Tape::max_pool2(Var x) {
  const Tensor& in = value(x);
  require_rank4(in, "max_pool2");
  const int n_batch = in.dim(0), c_n = in.dim(1), h = in.dim(2), w = in.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw Error(kModule, ErrorCode::ShapeMismatch, "max_pool2 needs even spatial dims, got " +
                                                       shape_string(in.shape()));
  }
  const int oh = h / 2, ow = w / 2;
  Tensor out({n_batch, c_n, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  std::size_t o = 0;
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < c_n; ++c) {
      for (int yy = 0; yy < oh; ++yy) {
        for (int xx = 0; xx < ow; ++xx, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_index = 0;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t idx =
                  ((static_cast<std::size_t>(n) * c_n + c) * h + 2 * yy + dy) * w + 2 * xx + dx;
              if (in[idx] > best) {
                best = in[idx];
                best_index = idx;
              }
            }
          }
          out[o] = best;
          argmax[o] = best_index;
        }
      }
    }
  }
  const bool track = tracks(x);
  const Var y = push(std::move(out), track);
  if (track) {
    adjoints_.push_back([=, argmax = std::move(argmax)](Tape& t) {
      const Tensor& g = t.nodes_[y.id].grad;
      if (g.empty()) return;
      Tensor& gx = t.grad_buffer(x);
      for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += g[i];
    });
  }
  return y;
}

Tape::Var Tape::upsample2(Var x) {
  const Tensor& in = value(x);
  require_rank4(in, "upsample2");
  const int n_batch = in.dim(0), c_n = in.dim(1), h = in.dim(2), w = in.dim(3);
  Tensor out({n_batch, c_n, 2 * h, 2 * w});
  for (int n = 0; n < n_batch; ++n) {
    for (int c = 0; c < c_n; ++c) {
      for (int yy = 0; yy < 2 * h; ++yy) {
        for (int xx = 0; xx < 2 * w; ++xx) out.at(n, c, yy, xx) = in.at(n, c, yy / 2, xx / 2);
      }
    }
  }
  const bool track = tracks(x);
  const Var y = push(std::move(out), track);
  if (track) {
    adjoints_.push_back([=](Tape& t) {
      const Tensor& g = t.nodes_[y.id].grad;
      if (g.empty()) return;
      Tensor& gx = t.grad_buffer(x);
      for (int n = 0; n < n_batch; ++n) {
        for (int c = 0; c < c_n; ++c) {
          for (int yy = 0; yy < 2 * h; ++yy) {
            for (int xx = 0; xx < 2 * w; ++xx) gx.at(n, c, yy / 2, xx / 2) += g.at(n, c, yy, xx);
          }
        }
      }
    });
  }
  return y;
}

Tape::Var Tape::concat(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_rank4(ta, "concat");
  require_rank4(tb, "concat");
  if (ta.dim(0) != tb.dim(0) || ta.dim(2) != tb.dim(2) || ta.dim(3) != tb.dim(3)) {
    throw Error(kModule, ErrorCode::ShapeMismatch,
                "concat " + shape_string(ta.shape()) + " with " + shape_string(tb.shape()));
  }
  const int n_batch = ta.dim(0), ca = ta.dim(1), cb = tb.dim(1);
  const std::size_t plane = static_cast<std::size_t>(ta.dim(2)) * ta.dim(3);
  Tensor out({n_batch, ca + cb, ta.dim(2), ta.dim(3)});
  for (int n = 0; n < n_batch; ++n) {
    std::copy_n(&ta.at(n, 0, 0, 0), ca * plane, &out.at(n, 0, 0, 0));
    std::copy_n(&tb.at(n, 0, 0, 0), cb * plane, &out.at(n, ca, 0, 0));
  }
  const bool track = tracks(a) || tracks(b);
  const Var y = push(std::move(out), track);
  if (track) {
    adjoints_.push_back([=](Tape& t) {
      const Tensor& g = t.nodes_[y.id].grad;
      if (g.empty()) return;
      for (int n = 0; n < n_batch; ++n) {
        if (t.tracks(a)) {
          Tensor& ga = t.grad_buffer(a);
          const double* src = &g.at(n, 0, 0, 0);
          double* dst = &ga.at(n, 0, 0, 0);
          for (std::size_t i = 0; i < ca * plane; ++i) dst[i] += src[i];
        }
        if (t.tracks(b)) {
          Tensor& gb = t.grad_buffer(b);
          const double* src = &g.at(n, ca, 0, 0);
          double* dst = &gb.at(n, 0, 0, 0);
          for (std::size_t i = 0; i < cb * plane; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return y;
}

Tape::Var Tape::softmax(Var x) {
  const Tensor& in = value(x);
  require_rank4(in, "softmax");
  const int n_batch = in.dim(0), c_n = in.dim(1);
  const std::size_t plane = static_cast<std::size_t>(in.dim(2)) * in.dim(3);
  Tensor out(in.shape());
  for (int n = 0; n < n_batch; ++n) {
    const double* src = &in.at(n, 0, 0, 0);
    double* dst = &out.at(n, 0, 0, 0);
    for (std::size_t p = 0; p < plane; ++p) {
      double peak = src[p];
      for (int c = 1; c < c_n; ++c) peak = std::max(peak, src[c * plane + p]);
      double sum = 0.0;
      for (int c = 0; c < c_n; ++c) {
        dst[c * plane + p] = std::exp(src[c * plane + p] - peak);
        sum += dst[c * plane + p];
      }
      for (int c = 0; c < c_n; ++c) dst[c * plane + p] /= sum;
    }
  }
  const bool track = tracks(x);
  const Var y = push(std::move(out), track);
  if (track) {
    adjoints_.push_back([=](Tape& t) {
      const Tensor& g = t.nodes_[y.id].grad;
      if (g.empty()) return;
      const Tensor& prob = t.value(y);
      Tensor& gx = t.grad_buffer(x);
      for (int n = 0; n < n_batch; ++n) {
        const double* pr = &prob.at(n, 0, 0, 0);
        const double* go = &g.at(n, 0, 0, 0);
        double* gi = &gx.at(n, 0, 0, 0);
        for (std::size_t p = 0; p < plane; ++p) {
          double dot = 0.0;
          for (int c = 0; c < c_n; ++c) dot += go[c * plane + p] * pr[c * plane + p];
          for (int c = 0; c < c_n; ++c) gi[c * plane + p] += pr[c * plane + p] * (go[c * plane + p] - dot);
        }
      }
    });
  }
  return y;
}

void Tape::backward(Var output, const Tensor& seed) {
  if (nodes_.empty() || replayed_) {
    throw Error(kModule, ErrorCode::NoTape, "backward called without a recorded forward pass");
  }
  if (output.id >= nodes_.size() || !seed.same_shape(nodes_[output.id].value)) {
    throw Error(kModule, ErrorCode::ShapeMismatch,
                "backward seed " + shape_string(seed.shape()) + " does not match output");
  }
  replayed_ = true;
  if (!tracks(output)) return;
  Tensor& g = grad_buffer(output);
  for (std::size_t i = 0; i < seed.size(); ++i) g[i] += seed[i];
  for (auto it = adjoints_.rbegin(); it != adjoints_.rend(); ++it) (*it)(*this);
}

Gradients Tape::parameter_grads() const {
  Gradients out;
  for (const auto& node : nodes_) {
    if (node.parameter_name.empty()) continue;
    out[node.parameter_name] = node.grad.empty() ? Tensor(node.value.shape(), 0.0) : node.grad;
  }
  return out;
}

}  // namespace histoseg
