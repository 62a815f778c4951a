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

#include "histoseg/preprocessor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "histoseg/errors.hpp"

namespace histoseg {

namespace {

constexpr std::string_view kModule = "preprocessor";
constexpr char kArchiveMagic[4] = {'H', 'S', 'P', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[offset + i]) << (8 * i);
  return v;
}

template <typename T>
void require_fits(const Raster<T>& input, TargetShape target) {
  if (input.height() > target.side || input.width() > target.side) {
    throw Error(kModule, ErrorCode::TargetSmaller,
                std::to_string(input.height()) + "x" + std::to_string(input.width()) +
                    " does not fit target side " + std::to_string(target.side));
  }
}

double source_coord(int dst, int in, int out) {
  return (dst + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
}

}  // namespace

std::string_view variant_name(DatasetVariant variant) {
  switch (variant) {
    case DatasetVariant::SingleRater: return "single";
    case DatasetVariant::SingleRaterNoBBox: return "single_nobbox";
    case DatasetVariant::CombinedMultiRaterEval: return "combined";
  }
  return "single";
}

std::optional<DatasetVariant> parse_variant(std::string_view name) {
  if (name == "single") return DatasetVariant::SingleRater;
  if (name == "single_nobbox") return DatasetVariant::SingleRaterNoBBox;
  if (name == "combined") return DatasetVariant::CombinedMultiRaterEval;
  return std::nullopt;
}

FloatImage zscore_normalize(const FloatImage& pixels) {
  if (pixels.size() == 0) throw Error(kModule, ErrorCode::ShapeMismatch, "empty raster");
  const auto values = pixels.data();
  double sum = 0.0;
  for (float v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (float v : values) sq += (v - mean) * (v - mean);
  const double sigma = std::sqrt(sq / static_cast<double>(values.size()));

  FloatImage out(pixels.height(), pixels.width(), pixels.channels(), 0.0f);
  if (sigma < 1e-12) return out;
  auto dst = out.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    dst[i] = static_cast<float>((values[i] - mean) / sigma);
  }
  return out;
}

template <typename T>
Raster<T> pad_to_shape(const Raster<T>& input, TargetShape target, T fill) {
  require_fits(input, target);
  Raster<T> out(target.side, target.side, input.channels(), fill);
  for (int y = 0; y < input.height(); ++y) {
    for (int x = 0; x < input.width(); ++x) {
      for (int c = 0; c < input.channels(); ++c) out.at(y, x, c) = input.at(y, x, c);
    }
  }
  return out;
}

template Raster<float> pad_to_shape(const Raster<float>&, TargetShape, float);
template Raster<Superclass> pad_to_shape(const Raster<Superclass>&, TargetShape, Superclass);
template Raster<std::uint8_t> pad_to_shape(const Raster<std::uint8_t>&, TargetShape, std::uint8_t);

FloatImage pad_to_shape(const FloatImage& image, TargetShape target) {
  return pad_to_shape<float>(image, target, 0.0f);
}

ClassMap pad_to_shape(const ClassMap& mask, TargetShape target) {
  return pad_to_shape<Superclass>(mask, target, Superclass::Fov);
}

FloatImage resize_bilinear(const FloatImage& image, int out_height, int out_width) {
  if (image.empty()) throw Error(kModule, ErrorCode::ShapeMismatch, "cannot resize an empty image");
  if (image.same_spatial_shape(out_height, out_width)) return image;
  FloatImage out(out_height, out_width, image.channels());
  const int ih = image.height();
  const int iw = image.width();
  for (int y = 0; y < out_height; ++y) {
    const double sy = std::clamp(source_coord(y, ih, out_height), 0.0, ih - 1.0);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, ih - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double sx = std::clamp(source_coord(x, iw, out_width), 0.0, iw - 1.0);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, iw - 1);
      const double fx = sx - x0;
      for (int c = 0; c < image.channels(); ++c) {
        const double top = image.at(y0, x0, c) * (1.0 - fx) + image.at(y0, x1, c) * fx;
        const double bottom = image.at(y1, x0, c) * (1.0 - fx) + image.at(y1, x1, c) * fx;
        out.at(y, x, c) = static_cast<float>(top * (1.0 - fy) + bottom * fy);
      }
    }
  }
  return out;
}

template <typename T>
Raster<T> resize_nearest(const Raster<T>& input, int out_height, int out_width) {
  if (input.empty()) throw Error(kModule, ErrorCode::ShapeMismatch, "cannot resize an empty raster");
  if (input.same_spatial_shape(out_height, out_width)) return input;
  Raster<T> out(out_height, out_width, input.channels());
  for (int y = 0; y < out_height; ++y) {
    const int sy = std::min(input.height() - 1,
                            static_cast<int>((y + 0.5) * input.height() / out_height));
    for (int x = 0; x < out_width; ++x) {
      const int sx = std::min(input.width() - 1,
                              static_cast<int>((x + 0.5) * input.width() / out_width));
      for (int c = 0; c < input.channels(); ++c) out.at(y, x, c) = input.at(sy, sx, c);
    }
  }
  return out;
}

template Raster<float> resize_nearest(const Raster<float>&, int, int);
template Raster<Superclass> resize_nearest(const Raster<Superclass>&, int, int);
template Raster<std::uint8_t> resize_nearest(const Raster<std::uint8_t>&, int, int);

FloatImage resize_to_shape(const FloatImage& image, TargetShape target, ResizeKind kind) {
  return kind == ResizeKind::Image ? resize_bilinear(image, target.side, target.side)
                                   : resize_nearest(image, target.side, target.side);
}

ClassMap resize_to_shape(const ClassMap& mask, TargetShape target) {
  return resize_nearest(mask, target.side, target.side);
}

FloatImage to_unit_float(const RgbImage& image) {
  FloatImage out(image.height(), image.width(), image.channels());
  const auto src = image.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]) / 255.0f;
  return out;
}

RgbImage to_bytes(const FloatImage& image) {
  RgbImage out(image.height(), image.width(), image.channels());
  const auto src = image.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = static_cast<std::uint8_t>(std::lround(std::clamp(src[i], 0.0f, 1.0f) * 255.0f));
  }
  return out;
}

CroppedSample crop_stage(const TileSample& sample, const SuperclassTable& table, bool strip_bbox,
                         CropAnchor anchor, std::vector<std::uint32_t>* orphan_ids) {
  ClassMap classes = decode_class_map(sample.mask, table);
  if (strip_bbox) {
    const InstanceMap instances = decode_instance_map(sample.mask);
    auto stripped = strip_bounding_boxes(classes, instances, sample.records);
    classes = std::move(stripped.classes);
    if (orphan_ids) *orphan_ids = std::move(stripped.orphan_ids);
  }
  const RgbImage tile = crop_image_to_mask(sample.image, classes, anchor);
  return CroppedSample{sample.id, to_unit_float(tile), std::move(classes)};
}

ByteRaster onehot_encode(const ClassMap& mask) {
  ByteRaster out(mask.height(), mask.width(), kSuperclassCount, 0);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out.at(y, x, static_cast<int>(mask.at(y, x))) = 1;
  }
  return out;
}

ClassMap onehot_argmax(const ByteRaster& onehot) {
  ClassMap out(onehot.height(), onehot.width());
  for (int y = 0; y < onehot.height(); ++y) {
    for (int x = 0; x < onehot.width(); ++x) {
      int best = 0;
      for (int c = 1; c < onehot.channels(); ++c) {
        if (onehot.at(y, x, c) > onehot.at(y, x, best)) best = c;
      }
      out.at(y, x) = static_cast<Superclass>(best);
    }
  }
  return out;
}

PreparedSample finalize_sample(const CroppedSample& cropped, TargetShape target) {
  if (!cropped.image.same_spatial_shape(cropped.classes)) {
    throw Error(kModule, ErrorCode::ShapeMismatch, "image and mask of '" + cropped.id + "' differ");
  }
  const bool fits = cropped.classes.height() <= target.side && cropped.classes.width() <= target.side;
  PreparedSample out;
  out.sample_id = cropped.id;
  if (fits) {
    out.pixels = pad_to_shape(zscore_normalize(cropped.image), target);
    out.onehot = onehot_encode(pad_to_shape(cropped.classes, target));
  } else {
    out.pixels = zscore_normalize(resize_to_shape(cropped.image, target, ResizeKind::Image));
    out.onehot = onehot_encode(resize_to_shape(cropped.classes, target));
  }
  return out;
}

PreparedSample prepare_sample(const TileSample& sample, const SuperclassTable& table,
                              TargetShape target, bool strip_bbox, CropAnchor anchor) {
  return finalize_sample(crop_stage(sample, table, strip_bbox, anchor), target);
}

FloatImage fit_to_target(const FloatImage& image, TargetShape target) {
  if (image.height() <= target.side && image.width() <= target.side) {
    return pad_to_shape(image, target);
  }
  return resize_to_shape(image, target, ResizeKind::Image);
}

VariantAssignment assemble_variant(DatasetVariant variant, const SplitIndex& split,
                                   std::span<const std::string> single_ids,
                                   std::span<const std::string> multi_ids) {
  const std::set<std::string> single(single_ids.begin(), single_ids.end());
  for (const auto& id : multi_ids) {
    if (single.contains(id)) {
      throw Error(kModule, ErrorCode::OverlappingSets,
                  "sample '" + id + "' is in both the single- and multi-rater sets");
    }
  }

  VariantAssignment out;
  switch (variant) {
    case DatasetVariant::SingleRater:
    case DatasetVariant::SingleRaterNoBBox:
      out.train = split.train;
      out.val = split.val;
      out.eval = split.eval;
      out.strip_bbox = variant == DatasetVariant::SingleRaterNoBBox;
      break;
    case DatasetVariant::CombinedMultiRaterEval: {
      if (multi_ids.empty()) {
        throw Error(kModule, ErrorCode::EmptyEval, "combined variant needs a multi-rater set");
      }
      const double fit_share = split.ratios[0] + split.ratios[1];
      const double train_ratio = fit_share > 0.0 ? split.ratios[0] / fit_share : 1.0;
      const auto refit = make_split(single_ids, {train_ratio, 1.0 - train_ratio, 0.0}, split.seed);
      out.train = refit.train;
      out.val = refit.val;
      out.eval.assign(multi_ids.begin(), multi_ids.end());
      break;
    }
  }
  if (out.eval.empty()) {
    throw Error(kModule, ErrorCode::EmptyEval,
                std::string("variant '") + std::string(variant_name(variant)) + "' has no eval samples");
  }
  return out;
}

std::vector<std::uint8_t> encode_prepared(const PreparedSample& sample) {
  const int side = sample.side();
  std::vector<std::uint8_t> out;
  out.reserve(16 + sample.pixels.size() * 4 + sample.onehot.size());
  out.insert(out.end(), std::begin(kArchiveMagic), std::end(kArchiveMagic));
  put_u32(out, static_cast<std::uint32_t>(side));
  put_u32(out, static_cast<std::uint32_t>(sample.pixels.channels()));
  put_u32(out, static_cast<std::uint32_t>(sample.onehot.channels()));
  for (float v : sample.pixels.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  for (std::uint8_t v : sample.onehot.data()) out.push_back(v);
  return out;
}

PreparedSample decode_prepared(std::span<const std::uint8_t> bytes, std::string sample_id) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kArchiveMagic, 4) != 0) {
    throw Error(kModule, ErrorCode::FormatError, "not an HSP1 archive: " + sample_id);
  }
  const auto side = static_cast<int>(get_u32(bytes, 4));
  const auto channels = static_cast<int>(get_u32(bytes, 8));
  const auto classes = static_cast<int>(get_u32(bytes, 12));
  const std::size_t pixels = static_cast<std::size_t>(side) * side;
  if (channels < 1 || classes < 1 || bytes.size() != 16 + pixels * channels * 4 + pixels * classes) {
    throw Error(kModule, ErrorCode::FormatError, "truncated HSP1 archive: " + sample_id);
  }
  PreparedSample out;
  out.sample_id = std::move(sample_id);
  out.pixels = FloatImage(side, side, channels);
  out.onehot = ByteRaster(side, side, classes);
  std::size_t offset = 16;
  for (float& v : out.pixels.data()) {
    v = std::bit_cast<float>(get_u32(bytes, offset));
    offset += 4;
  }
  for (std::uint8_t& v : out.onehot.data()) v = bytes[offset++];
  return out;
}

void write_prepared(const std::filesystem::path& path, const PreparedSample& sample) {
  const auto bytes = encode_prepared(sample);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(kModule, ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

PreparedSample read_prepared(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(kModule, ErrorCode::IoError, "cannot read " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return decode_prepared(bytes, path.stem().string());
}

}  // namespace histoseg
