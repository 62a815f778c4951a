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
#include <utility>
#include <variant>

#include "histoseg/mask_codec.hpp"
#include "histoseg/preprocessor.hpp"
#include "histoseg/raster.hpp"

namespace histoseg {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct AugmentConfig {
  double p_mirror = 0.5;
  double p_rotate = 0.5;
  double p_scale = 0.3;
  double p_elastic = 0.3;
  /// Chance of the brightness / contrast / gamma group.
  double p_intensity = 0.5;
  double p_noise = 0.3;
  Interval scale_range{0.9, 1.1};
  double elastic_alpha = 10.0;
  double elastic_sigma = 4.0;
  double brightness_delta = 0.1;
  Interval contrast_range{0.9, 1.1};
  Interval gamma_range{0.8, 1.2};
  double noise_sigma = 0.01;
  /// Off: rotations are multiples of 90 degrees. On: uniform angle in
  /// [-max_rotation_degrees, max_rotation_degrees].
  bool free_rotation = false;
  double max_rotation_degrees = 30.0;
  std::uint64_t seed = 0;

  /// Throws BadConfig.
  void validate() const;
};

/// axis 0 flips rows (vertical), axis 1 flips columns (horizontal).
struct Mirror { int axis = 1; };
/// k quarter turns clockwise; odd k swaps height and width.
struct Rotate90 { int k = 0; };
/// Rotation about the centre by an arbitrary angle, edge-clamped sampling.
struct Rotate { double degrees = 0.0; };
/// Zoom about the centre; shape is kept (crop for f > 1, edge-clamp for f < 1).
struct Scale { double factor = 1.0; };
/// Per-pixel displacement in pixels: sample source at (y + dy, x + dx).
struct Elastic {
  Raster<float> dx;
  Raster<float> dy;
};

using SpatialOp = std::variant<Mirror, Rotate90, Rotate, Scale, Elastic>;

struct Brightness { double delta = 0.0; };
struct Contrast { double factor = 1.0; };
struct Gamma { double exponent = 1.0; };
struct GaussianNoise {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

using IntensityOp = std::variant<Brightness, Contrast, Gamma, GaussianNoise>;

/// Gaussian N(0,1) noise per pixel, blurred with a Gaussian of width sigma,
/// scaled by alpha.
Elastic make_elastic_field(int height, int width, double alpha, double sigma, std::uint64_t seed);

/// Same geometric transform on both; the image is resampled bilinearly, the
/// mask by nearest neighbour.
std::pair<FloatImage, ClassMap> apply_spatial(const FloatImage& image, const ClassMap& mask,
                                              const SpatialOp& op);

/// Expects values in [0,1] and clamps the result back to [0,1].
FloatImage apply_intensity(const FloatImage& image, const IntensityOp& op);

/// Draws each transform with its probability from a stream seeded by
/// (cfg.seed, draw_index). Spatial transforms run first (mirror, rotate,
/// scale, elastic), then brightness, contrast, gamma and noise on the image.
std::pair<FloatImage, ClassMap> augment_pair(const FloatImage& image, const ClassMap& mask,
                                             const AugmentConfig& cfg, std::uint64_t draw_index);

CroppedSample augment_sample(const CroppedSample& sample, const AugmentConfig& cfg,
                             std::uint64_t draw_index);

}  // namespace histoseg
