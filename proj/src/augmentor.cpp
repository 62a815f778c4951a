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

#include "histoseg/augmentor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "histoseg/errors.hpp"
#include "histoseg/rng.hpp"

namespace histoseg {

namespace {

constexpr std::string_view kModule = "augmentor";

void require_same_shape(const FloatImage& image, const ClassMap& mask) {
  if (!image.same_spatial_shape(mask)) {
    throw Error(kModule, ErrorCode::ShapeMismatch, "image and mask differ in spatial shape");
  }
}

// Resamples both rasters through a destination -> source coordinate map.
// Coordinates outside the raster clamp to the border.
template <typename Map>
std::pair<FloatImage, ClassMap> resample(const FloatImage& image, const ClassMap& mask, Map source) {
  const int h = image.height();
  const int w = image.width();
  FloatImage out_image(h, w, image.channels());
  ClassMap out_mask(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto [sy, sx] = source(y, x);
      sy = std::clamp(sy, 0.0, h - 1.0);
      sx = std::clamp(sx, 0.0, w - 1.0);
      const int y0 = static_cast<int>(std::floor(sy));
      const int x0 = static_cast<int>(std::floor(sx));
      const int y1 = std::min(y0 + 1, h - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const double fy = sy - y0;
      const double fx = sx - x0;
      for (int c = 0; c < image.channels(); ++c) {
        const double top = image.at(y0, x0, c) * (1.0 - fx) + image.at(y0, x1, c) * fx;
        const double bottom = image.at(y1, x0, c) * (1.0 - fx) + image.at(y1, x1, c) * fx;
        out_image.at(y, x, c) = static_cast<float>(top * (1.0 - fy) + bottom * fy);
      }
      const int ny = std::clamp(static_cast<int>(std::lround(sy)), 0, h - 1);
      const int nx = std::clamp(static_cast<int>(std::lround(sx)), 0, w - 1);
      out_mask.at(y, x) = mask.at(ny, nx);
    }
  }
  return {std::move(out_image), std::move(out_mask)};
}

template <typename T>
Raster<T> mirror(const Raster<T>& in, int axis) {
  Raster<T> out(in.height(), in.width(), in.channels());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      const int sy = axis == 0 ? in.height() - 1 - y : y;
      const int sx = axis == 0 ? x : in.width() - 1 - x;
      for (int c = 0; c < in.channels(); ++c) out.at(y, x, c) = in.at(sy, sx, c);
    }
  }
  return out;
}

// One clockwise quarter turn: out(r, c) = in(H - 1 - c, r).
template <typename T>
Raster<T> rotate_quarter(const Raster<T>& in) {
  Raster<T> out(in.width(), in.height(), in.channels());
  for (int r = 0; r < out.height(); ++r) {
    for (int c = 0; c < out.width(); ++c) {
      for (int ch = 0; ch < in.channels(); ++ch) out.at(r, c, ch) = in.at(in.height() - 1 - c, r, ch);
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable blur with border clamping.
Raster<float> blur(const Raster<float>& in, double sigma) {
  if (sigma <= 0.0) return in;
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int h = in.height();
  const int w = in.width();
  Raster<float> tmp(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * in.at(y, std::clamp(x + i, 0, w - 1));
      tmp.at(y, x) = static_cast<float>(acc);
    }
  }
  Raster<float> out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(std::clamp(y + i, 0, h - 1), x);
      out.at(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

bool well_ordered(const Interval& r) { return r.lo <= r.hi; }
bool probability(double p) { return p >= 0.0 && p <= 1.0; }

// Stream tags so each transform draws from its own sub-stream.
enum StreamTag : std::uint64_t {
  kMirrorTag = 1, kRotateTag, kScaleTag, kElasticTag, kIntensityTag, kNoiseTag
};

}  // namespace

void AugmentConfig::validate() const {
  if (!probability(p_mirror) || !probability(p_rotate) || !probability(p_scale) ||
      !probability(p_elastic) || !probability(p_intensity) || !probability(p_noise)) {
    throw Error(kModule, ErrorCode::BadConfig, "augmentation probabilities must lie in [0,1]");
  }
  if (!well_ordered(scale_range) || scale_range.lo <= 0.0) {
    throw Error(kModule, ErrorCode::BadConfig, "scale_range must be positive and ordered");
  }
  if (!well_ordered(contrast_range)) {
    throw Error(kModule, ErrorCode::BadConfig, "contrast_range must be ordered");
  }
  if (!well_ordered(gamma_range) || gamma_range.lo <= 0.0) {
    throw Error(kModule, ErrorCode::BadConfig, "gamma_range must be positive and ordered");
  }
  if (noise_sigma < 0.0 || elastic_alpha < 0.0 || elastic_sigma < 0.0 || brightness_delta < 0.0) {
    throw Error(kModule, ErrorCode::BadConfig, "noise, elastic and brightness magnitudes must be >= 0");
  }
}

Elastic make_elastic_field(int height, int width, double alpha, double sigma, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Raster<float> dx(height, width);
  Raster<float> dy(height, width);
  for (float& v : dx.data()) v = static_cast<float>(rng.normal());
  for (float& v : dy.data()) v = static_cast<float>(rng.normal());
  Elastic field{blur(dx, sigma), blur(dy, sigma)};
  for (float& v : field.dx.data()) v = static_cast<float>(v * alpha);
  for (float& v : field.dy.data()) v = static_cast<float>(v * alpha);
  return field;
}

std::pair<FloatImage, ClassMap> apply_spatial(const FloatImage& image, const ClassMap& mask,
                                              const SpatialOp& op) {
  require_same_shape(image, mask);
  const double cy = (image.height() - 1) / 2.0;
  const double cx = (image.width() - 1) / 2.0;

  return std::visit(
      [&](const auto& t) -> std::pair<FloatImage, ClassMap> {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Mirror>) {
          if (t.axis != 0 && t.axis != 1) {
            throw Error(kModule, ErrorCode::BadConfig, "mirror axis must be 0 or 1");
          }
          return {mirror(image, t.axis), mirror(mask, t.axis)};
        } else if constexpr (std::is_same_v<T, Rotate90>) {
          const int turns = ((t.k % 4) + 4) % 4;
          FloatImage img = image;
          ClassMap m = mask;
          for (int i = 0; i < turns; ++i) {
            img = rotate_quarter(img);
            m = rotate_quarter(m);
          }
          return {std::move(img), std::move(m)};
        } else if constexpr (std::is_same_v<T, Rotate>) {
          const double rad = t.degrees * std::numbers::pi / 180.0;
          const double c = std::cos(rad);
          const double s = std::sin(rad);
          return resample(image, mask, [&](int y, int x) {
            const double ry = y - cy;
            const double rx = x - cx;
            return std::pair{cy + c * ry - s * rx, cx + s * ry + c * rx};
          });
        } else if constexpr (std::is_same_v<T, Scale>) {
          if (!(t.factor > 0.0)) throw Error(kModule, ErrorCode::BadConfig, "scale factor must be > 0");
          return resample(image, mask, [&](int y, int x) {
            return std::pair{cy + (y - cy) / t.factor, cx + (x - cx) / t.factor};
          });
        } else {
          if (!t.dx.same_spatial_shape(image) || !t.dy.same_spatial_shape(image)) {
            throw Error(kModule, ErrorCode::ShapeMismatch, "elastic field does not match the image");
          }
          return resample(image, mask, [&](int y, int x) {
            return std::pair{y + static_cast<double>(t.dy.at(y, x)),
                             x + static_cast<double>(t.dx.at(y, x))};
          });
        }
      },
      op);
}

FloatImage apply_intensity(const FloatImage& image, const IntensityOp& op) {
  FloatImage out = image;
  auto values = out.data();
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          if (t.sigma == 0.0) return;
          SplitMix64 rng(t.seed);
          for (float& v : values) v = static_cast<float>(std::clamp(v + t.sigma * rng.normal(), 0.0, 1.0));
        } else {
          for (float& v : values) {
            double x = v;
            if constexpr (std::is_same_v<T, Brightness>) {
              x += t.delta;
            } else if constexpr (std::is_same_v<T, Contrast>) {
              x = (x - 0.5) * t.factor + 0.5;
            } else {
              x = std::pow(x, t.exponent);
            }
            v = static_cast<float>(std::clamp(x, 0.0, 1.0));
          }
        }
      },
      op);
  return out;
}

std::pair<FloatImage, ClassMap> augment_pair(const FloatImage& image, const ClassMap& mask,
                                             const AugmentConfig& cfg, std::uint64_t draw_index) {
  require_same_shape(image, mask);
  cfg.validate();
  auto stream = [&](StreamTag tag) { return SplitMix64(mix_seed({cfg.seed, draw_index, tag})); };

  std::pair<FloatImage, ClassMap> cur{image, mask};
  auto spatial = [&](const SpatialOp& op) { cur = apply_spatial(cur.first, cur.second, op); };

  // Every stream draws its parameters before testing the probability so the
  // sequence of draws never depends on which transforms fire.
  {
    auto rng = stream(kMirrorTag);
    const double u = rng.uniform();
    const int axis = static_cast<int>(rng.below(2));
    if (u < cfg.p_mirror) spatial(Mirror{axis});
  }
  {
    auto rng = stream(kRotateTag);
    const double u = rng.uniform();
    const int k = 1 + static_cast<int>(rng.below(3));
    const double degrees = rng.uniform(-cfg.max_rotation_degrees, cfg.max_rotation_degrees);
    if (u < cfg.p_rotate) {
      if (cfg.free_rotation) {
        spatial(Rotate{degrees});
      } else {
        spatial(Rotate90{k});
      }
    }
  }
  {
    auto rng = stream(kScaleTag);
    const double u = rng.uniform();
    const double f = rng.uniform(cfg.scale_range.lo, cfg.scale_range.hi);
    if (u < cfg.p_scale) spatial(Scale{f});
  }
  {
    auto rng = stream(kElasticTag);
    const double u = rng.uniform();
    const std::uint64_t field_seed = rng.next();
    if (u < cfg.p_elastic) {
      spatial(make_elastic_field(cur.first.height(), cur.first.width(), cfg.elastic_alpha,
                                 cfg.elastic_sigma, field_seed));
    }
  }
  {
    auto rng = stream(kIntensityTag);
    const double u = rng.uniform();
    const double d = rng.uniform(-cfg.brightness_delta, cfg.brightness_delta);
    const double c = rng.uniform(cfg.contrast_range.lo, cfg.contrast_range.hi);
    const double g = rng.uniform(cfg.gamma_range.lo, cfg.gamma_range.hi);
    if (u < cfg.p_intensity) {
      cur.first = apply_intensity(cur.first, Brightness{d});
      cur.first = apply_intensity(cur.first, Contrast{c});
      cur.first = apply_intensity(cur.first, Gamma{g});
    }
  }
  {
    auto rng = stream(kNoiseTag);
    const double u = rng.uniform();
    const std::uint64_t noise_seed = rng.next();
    if (u < cfg.p_noise) cur.first = apply_intensity(cur.first, GaussianNoise{cfg.noise_sigma, noise_seed});
  }
  return cur;
}

CroppedSample augment_sample(const CroppedSample& sample, const AugmentConfig& cfg,
                             std::uint64_t draw_index) {
  auto [image, mask] = augment_pair(sample.image, sample.classes, cfg, draw_index);
  return CroppedSample{sample.id, std::move(image), std::move(mask)};
}

}  // namespace histoseg
