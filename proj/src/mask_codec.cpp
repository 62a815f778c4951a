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

#include "histoseg/mask_codec.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "histoseg/csv.hpp"
#include "histoseg/errors.hpp"

namespace histoseg {

namespace {

constexpr std::string_view kModule = "mask_codec";

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

template <typename Int>
std::optional<Int> parse_int(std::string_view text) {
  text = trim(text);
  Int value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(kModule, ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void require_nonempty(const RawMask& mask) {
  if (mask.ch1.empty()) throw Error(kModule, ErrorCode::EmptyMask, "mask has zero area");
  if (!mask.ch2.same_spatial_shape(mask.ch1) || !mask.ch3.same_spatial_shape(mask.ch1)) {
    throw Error(kModule, ErrorCode::ShapeMismatch, "mask channels differ in shape");
  }
}

}  // namespace

std::string_view superclass_name(Superclass cls) {
  switch (cls) {
    case Superclass::Fov: return "FOV";
    case Superclass::Tumor: return "TUMOR";
    case Superclass::Stromal: return "STROMAL";
    case Superclass::Stils: return "STILS";
  }
  return "FOV";
}

std::optional<Superclass> parse_superclass(std::string_view text) {
  const std::string key = lowercase(trim(text));
  if (key == "fov" || key == "0") return Superclass::Fov;
  if (key == "tumor" || key == "1") return Superclass::Tumor;
  if (key == "stromal" || key == "2") return Superclass::Stromal;
  if (key == "stils" || key == "3") return Superclass::Stils;
  return std::nullopt;
}

RawMask RawMask::from_interleaved(const ByteRaster& mask) {
  if (mask.channels() != 3) {
    throw Error(kModule, ErrorCode::FormatError,
                "mask must have 3 channels, got " + std::to_string(mask.channels()));
  }
  RawMask out{ByteRaster(mask.height(), mask.width()), ByteRaster(mask.height(), mask.width()),
              ByteRaster(mask.height(), mask.width())};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      out.ch1.at(y, x) = mask.at(y, x, 0);
      out.ch2.at(y, x) = mask.at(y, x, 1);
      out.ch3.at(y, x) = mask.at(y, x, 2);
    }
  }
  return out;
}

SuperclassTable SuperclassTable::parse(std::string_view text) {
  SuperclassTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(kModule, ErrorCode::ParseError,
                  "superclass table line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(view.substr(0, eq));
    const auto cls = parse_superclass(view.substr(eq + 1));
    if (key.empty() || !cls) {
      throw Error(kModule, ErrorCode::ParseError,
                  "superclass table line " + std::to_string(line_no) + ": bad entry '" +
                      std::string(view) + "'");
    }
    if (const auto id = parse_int<int>(key)) {
      if (*id < 0 || *id > 255) {
        throw Error(kModule, ErrorCode::ParseError,
                    "superclass table line " + std::to_string(line_no) + ": id out of range");
      }
      table.map_id(static_cast<std::uint8_t>(*id), *cls);
    } else {
      table.map_name(key, *cls);
    }
  }
  return table;
}

SuperclassTable SuperclassTable::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

void SuperclassTable::map_id(std::uint8_t raw_id, Superclass cls) { by_id_[raw_id] = cls; }

void SuperclassTable::map_name(std::string_view raw_name, Superclass cls) {
  by_name_[lowercase(raw_name)] = cls;
}

Superclass SuperclassTable::resolve(std::uint8_t raw_id) const noexcept {
  return by_id_[raw_id].value_or(default_class());
}

Superclass SuperclassTable::resolve(std::string_view raw_name) const {
  const auto it = by_name_.find(lowercase(raw_name));
  return it == by_name_.end() ? default_class() : it->second;
}

std::size_t SuperclassTable::mapped_id_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(by_id_.begin(), by_id_.end(), [](const auto& v) { return v.has_value(); }));
}

ClassMap decode_class_map(const RawMask& mask, const SuperclassTable& table) {
  require_nonempty(mask);
  ClassMap out(mask.height(), mask.width());
  const auto src = mask.ch1.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = table.resolve(src[i]);
  return out;
}

InstanceMap decode_instance_map(const RawMask& mask) {
  require_nonempty(mask);
  InstanceMap out(mask.height(), mask.width());
  const auto a = mask.ch2.data();
  const auto b = mask.ch3.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = static_cast<std::uint32_t>(a[i]) * static_cast<std::uint32_t>(b[i]);
  }
  return out;
}

StripResult strip_bounding_boxes(const ClassMap& classes, const InstanceMap& instances,
                                 std::span<const LocalizationRecord> records) {
  if (!classes.same_spatial_shape(instances)) {
    throw Error(kModule, ErrorCode::ShapeMismatch, "class and instance maps differ in shape");
  }
  StripResult result{classes, instances, {}};

  std::unordered_set<std::uint32_t> boxed;
  for (const auto& rec : records) {
    if (rec.kind == RecordKind::BoundingBox && rec.instance_id != 0) boxed.insert(rec.instance_id);
  }
  if (boxed.empty()) return result;

  std::unordered_set<std::uint32_t> seen;
  auto labels = result.classes.data();
  auto ids = result.instances.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] != 0 && boxed.contains(ids[i])) {
      seen.insert(ids[i]);
      labels[i] = Superclass::Fov;
      ids[i] = 0;
    }
  }
  for (const auto& rec : records) {
    if (rec.kind == RecordKind::BoundingBox && !seen.contains(rec.instance_id) &&
        std::find(result.orphan_ids.begin(), result.orphan_ids.end(), rec.instance_id) ==
            result.orphan_ids.end()) {
      result.orphan_ids.push_back(rec.instance_id);
    }
  }
  return result;
}

RgbImage crop_image_to_mask(const RgbImage& image, const ClassMap& mask, CropAnchor anchor) {
  const int h = mask.height();
  const int w = mask.width();
  if (h > image.height() || w > image.width()) {
    throw Error(kModule, ErrorCode::MaskLargerThanImage,
                "mask " + std::to_string(h) + "x" + std::to_string(w) + " exceeds image " +
                    std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
  const int y0 = anchor == CropAnchor::Center ? (image.height() - h) / 2 : 0;
  const int x0 = anchor == CropAnchor::Center ? (image.width() - w) / 2 : 0;
  RgbImage out(h, w, image.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < image.channels(); ++c) out.at(y, x, c) = image.at(y + y0, x + x0, c);
    }
  }
  return out;
}

std::vector<LocalizationRecord> parse_localization_csv(std::string_view text,
                                                       const LocalizationColumns& columns) {
  const auto rows = csv::parse(text);
  if (rows.empty()) return {};

  const auto& header = rows.front();
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    return std::nullopt;
  };
  auto require = [&](const std::string& name) {
    const auto idx = column(name);
    if (!idx) {
      throw Error(kModule, ErrorCode::ParseError, "localization CSV lacks column '" + name + "'");
    }
    return *idx;
  };

  const std::size_t id_col = require(columns.instance_id);
  const std::size_t class_col = require(columns.raw_class);
  const std::size_t kind_col = require(columns.kind);
  const auto xmin_col = column(columns.xmin);
  const auto ymin_col = column(columns.ymin);
  const auto xmax_col = column(columns.xmax);
  const auto ymax_col = column(columns.ymax);
  const auto coords_col = column(columns.coords);
  const bool has_box_cols = xmin_col && ymin_col && xmax_col && ymax_col;

  std::vector<LocalizationRecord> records;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "localization row " + std::to_string(r);
    auto cell = [&](std::size_t idx) -> std::string_view {
      return idx < row.size() ? trim(row[idx]) : std::string_view{};
    };
    auto int_cell = [&](std::size_t idx, const std::string& name) {
      const auto v = parse_int<int>(cell(idx));
      if (!v) throw Error(kModule, ErrorCode::InvalidRecord, where + ": bad " + name);
      return *v;
    };

    LocalizationRecord rec;
    const auto id = parse_int<std::uint32_t>(cell(id_col));
    if (!id) throw Error(kModule, ErrorCode::InvalidRecord, where + ": bad instance_id");
    rec.instance_id = *id;
    rec.raw_class = std::string(cell(class_col));

    const std::string kind = lowercase(cell(kind_col));
    if (kind == "bbox") {
      rec.kind = RecordKind::BoundingBox;
      if (!has_box_cols) {
        throw Error(kModule, ErrorCode::InvalidRecord, where + ": bbox record without box columns");
      }
      const Point lo{int_cell(*xmin_col, "xmin"), int_cell(*ymin_col, "ymin")};
      const Point hi{int_cell(*xmax_col, "xmax"), int_cell(*ymax_col, "ymax")};
      if (lo.x > hi.x || lo.y > hi.y) {
        throw Error(kModule, ErrorCode::InvalidRecord, where + ": bbox min corner exceeds max");
      }
      rec.coords = {lo, hi};
    } else if (kind == "polygon") {
      rec.kind = RecordKind::Polygon;
      if (!coords_col) {
        throw Error(kModule, ErrorCode::InvalidRecord, where + ": polygon without coords column");
      }
      std::string_view rest = cell(*coords_col);
      while (!rest.empty()) {
        const auto semi = rest.find(';');
        const std::string_view pair = trim(rest.substr(0, semi));
        rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
        if (pair.empty()) continue;
        const auto comma = pair.find(',');
        const auto x = comma == std::string_view::npos ? std::nullopt : parse_int<int>(pair.substr(0, comma));
        const auto y = comma == std::string_view::npos ? std::nullopt : parse_int<int>(pair.substr(comma + 1));
        if (!x || !y) {
          throw Error(kModule, ErrorCode::InvalidRecord, where + ": bad coordinate '" + std::string(pair) + "'");
        }
        rec.coords.push_back({*x, *y});
      }
      if (rec.coords.size() < 3) {
        throw Error(kModule, ErrorCode::InvalidRecord, where + ": polygon needs at least 3 vertices");
      }
    } else {
      throw Error(kModule, ErrorCode::InvalidRecord, where + ": unknown kind '" + kind + "'");
    }
    for (const auto& p : rec.coords) {
      if (p.x < 0 || p.y < 0) {
        throw Error(kModule, ErrorCode::InvalidRecord, where + ": negative coordinate");
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<LocalizationRecord> load_localization(const std::filesystem::path& path,
                                                  const LocalizationColumns& columns) {
  return parse_localization_csv(read_file(path), columns);
}

void validate_record_bounds(std::span<const LocalizationRecord> records, int width, int height) {
  for (const auto& rec : records) {
    for (const auto& p : rec.coords) {
      if (p.x >= width || p.y >= height) {
        throw Error(kModule, ErrorCode::InvalidRecord,
                    "instance " + std::to_string(rec.instance_id) + " has coordinate (" +
                        std::to_string(p.x) + "," + std::to_string(p.y) + ") outside " +
                        std::to_string(width) + "x" + std::to_string(height) + " tile");
      }
    }
  }
}

}  // namespace histoseg
