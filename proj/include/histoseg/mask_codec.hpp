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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "histoseg/raster.hpp"

namespace histoseg {

/// Evaluation classes. Ids are stable: they index one-hot channels, metric
/// rows and report columns everywhere.
enum class Superclass : std::uint8_t { Fov = 0, Tumor = 1, Stromal = 2, Stils = 3 };

inline constexpr int kSuperclassCount = 4;
inline constexpr std::array<Superclass, kSuperclassCount> kAllSuperclasses = {
    Superclass::Fov, Superclass::Tumor, Superclass::Stromal, Superclass::Stils};

std::string_view superclass_name(Superclass cls);
/// Accepts the canonical names (case-insensitive) or a digit 0..3.
std::optional<Superclass> parse_superclass(std::string_view text);

using ClassMap = Raster<Superclass>;
/// Per-pixel nucleus ids; 0 means "no instance".
using InstanceMap = Raster<std::uint32_t>;

/// Three-channel annotation mask: ch1 raw class id, ch2 and ch3 instance
/// factors.
struct RawMask {
  ByteRaster ch1;
  ByteRaster ch2;
  ByteRaster ch3;

  /// Splits an interleaved 3-channel raster (as read from PNG).
  static RawMask from_interleaved(const ByteRaster& mask);

  int height() const { return ch1.height(); }
  int width() const { return ch1.width(); }
};

enum class RecordKind { BoundingBox, Polygon };

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct LocalizationRecord {
  std::uint32_t instance_id = 0;
  std::string raw_class;
  RecordKind kind = RecordKind::Polygon;
  /// BoundingBox: {min corner, max corner}. Polygon: >= 3 vertices.
  std::vector<Point> coords;
};

/// Column names of the localization CSV; each may be remapped by config.
struct LocalizationColumns {
  std::string instance_id = "instance_id";
  std::string raw_class = "raw_class";
  std::string kind = "kind";
  std::string xmin = "xmin";
  std::string ymin = "ymin";
  std::string xmax = "xmax";
  std::string ymax = "ymax";
  std::string coords = "coords";
};

/// Total map from raw class (numeric id from mask channel 1, or a name as it
/// appears in localization files) to superclass. Anything unmapped resolves
/// to FOV.
class SuperclassTable {
 public:
  SuperclassTable() = default;

  /// Parses "key = superclass" lines. Numeric keys 0..255 map mask ids; any
  /// other key maps a raw class name (matched case-insensitively). `#` starts
  /// a comment.
  static SuperclassTable parse(std::string_view text);
  static SuperclassTable load(const std::filesystem::path& path);

  void map_id(std::uint8_t raw_id, Superclass cls);
  void map_name(std::string_view raw_name, Superclass cls);

  Superclass resolve(std::uint8_t raw_id) const noexcept;
  Superclass resolve(std::string_view raw_name) const;
  Superclass default_class() const noexcept { return Superclass::Fov; }

  std::size_t mapped_id_count() const noexcept;

 private:
  std::array<std::optional<Superclass>, 256> by_id_{};
  std::map<std::string, Superclass, std::less<>> by_name_;
};

ClassMap decode_class_map(const RawMask& mask, const SuperclassTable& table);

/// id(p) = ch2(p) * ch3(p). Equal products are treated as one instance.
InstanceMap decode_instance_map(const RawMask& mask);

struct StripResult {
  ClassMap classes;
  InstanceMap instances;
  /// Bounding-box records whose id never occurs in the instance map.
  std::vector<std::uint32_t> orphan_ids;
};

/// Resets every pixel owned by a bounding-box instance to FOV / id 0.
/// Polygon instances and background are left as they are.
StripResult strip_bounding_boxes(const ClassMap& classes, const InstanceMap& instances,
                                 std::span<const LocalizationRecord> records);

enum class CropAnchor { TopLeft, Center };

/// Cuts an oversized tile down to the mask's shape.
RgbImage crop_image_to_mask(const RgbImage& image, const ClassMap& mask,
                            CropAnchor anchor = CropAnchor::TopLeft);

std::vector<LocalizationRecord> parse_localization_csv(
    std::string_view text, const LocalizationColumns& columns = {});
std::vector<LocalizationRecord> load_localization(const std::filesystem::path& path,
                                                  const LocalizationColumns& columns = {});

/// Throws InvalidRecord when a record has coordinates outside a width x height tile.
void validate_record_bounds(std::span<const LocalizationRecord> records, int width, int height);

}  // namespace histoseg
