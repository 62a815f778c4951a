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
#include <span>
#include <string>
#include <vector>

#include "histoseg/dataset.hpp"
#include "histoseg/dataset_explorer.hpp"
#include "histoseg/mask_codec.hpp"
#include "histoseg/raster.hpp"

namespace histoseg {

/// A decoded tile after bounding-box stripping and cropping, before any
/// geometry normalization. Image values are in [0,1]. Augmentation works on
/// this form.
struct CroppedSample {
  std::string id;
  FloatImage image;
  ClassMap classes;
};

/// Network-ready sample: side x side x 3 z-scored pixels and side x side x 4
/// one-hot labels (channel = superclass id).
struct PreparedSample {
  std::string sample_id;
  FloatImage pixels;
  ByteRaster onehot;

  int side() const { return pixels.height(); }
};

enum class DatasetVariant { SingleRater, SingleRaterNoBBox, CombinedMultiRaterEval };

std::string_view variant_name(DatasetVariant variant);
std::optional<DatasetVariant> parse_variant(std::string_view name);

/// Population z-score over all pixels and channels jointly; a raster with
/// sigma < 1e-12 maps to zeros.
FloatImage zscore_normalize(const FloatImage& pixels);

/// Places the input at the top-left of a side x side canvas filled with `fill`.
template <typename T>
Raster<T> pad_to_shape(const Raster<T>& input, TargetShape target, T fill);
FloatImage pad_to_shape(const FloatImage& image, TargetShape target);  // fill 0
ClassMap pad_to_shape(const ClassMap& mask, TargetShape target);       // fill FOV

enum class ResizeKind { Image, Mask };

/// Pixel-centre sampling: source coordinate = (dst + 0.5) * in / out - 0.5.
FloatImage resize_bilinear(const FloatImage& image, int out_height, int out_width);
template <typename T>
Raster<T> resize_nearest(const Raster<T>& input, int out_height, int out_width);

FloatImage resize_to_shape(const FloatImage& image, TargetShape target, ResizeKind kind);
/// Masks always use nearest-neighbour so labels are never blended.
ClassMap resize_to_shape(const ClassMap& mask, TargetShape target);

FloatImage to_unit_float(const RgbImage& image);
RgbImage to_bytes(const FloatImage& image);

/// decode -> optional bounding-box strip -> crop image to mask.
CroppedSample crop_stage(const TileSample& sample, const SuperclassTable& table, bool strip_bbox,
                         CropAnchor anchor = CropAnchor::TopLeft,
                         std::vector<std::uint32_t>* orphan_ids = nullptr);

/// Pad when both dims fit the target (z-score first, so padding is the
/// normalized mean 0), otherwise stretch-resize to the target then z-score.
/// Ends with the one-hot encoding.
PreparedSample finalize_sample(const CroppedSample& cropped, TargetShape target);

PreparedSample prepare_sample(const TileSample& sample, const SuperclassTable& table,
                              TargetShape target, bool strip_bbox,
                              CropAnchor anchor = CropAnchor::TopLeft);

/// The [0,1] tile brought to the target geometry (pad with 0 or resize), for
/// overlays.
FloatImage fit_to_target(const FloatImage& image, TargetShape target);

ByteRaster onehot_encode(const ClassMap& mask);
ClassMap onehot_argmax(const ByteRaster& onehot);

struct VariantAssignment {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> eval;
  bool strip_bbox = false;
};

/// SingleRater: the split as is. SingleRaterNoBBox: same ids, strip flag set.
/// CombinedMultiRaterEval: every single-rater id is re-split into train/val
/// with the split's train:val proportion and seed; eval is all of multi_ids.
VariantAssignment assemble_variant(DatasetVariant variant, const SplitIndex& split,
                                   std::span<const std::string> single_ids,
                                   std::span<const std::string> multi_ids);

/// Archive layout (little-endian):
///   offset 0  "HSP1"
///   offset 4  u32 side
///   offset 8  u32 channels (3)
///   offset 12 u32 class count (4)
///   then side*side*channels f32 pixels (HWC), then side*side*classes u8 one-hot.
std::vector<std::uint8_t> encode_prepared(const PreparedSample& sample);
PreparedSample decode_prepared(std::span<const std::uint8_t> bytes, std::string sample_id);
void write_prepared(const std::filesystem::path& path, const PreparedSample& sample);
PreparedSample read_prepared(const std::filesystem::path& path);

}  // namespace histoseg
