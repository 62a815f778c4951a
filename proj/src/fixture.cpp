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

#include "histoseg/fixture.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

#include "histoseg/errors.hpp"
#include "histoseg/image_io.hpp"
#include "histoseg/raster.hpp"
#include "histoseg/rng.hpp"

namespace histoseg {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kModule = "fixture";

struct RawClass {
  std::uint8_t id;
  const char* name;
  std::array<int, 3> colour;
  double radius_lo;
  double radius_hi;
  double elongation;
};

// Ids match the table written by write_table; macrophage stays unmapped.
constexpr std::array<RawClass, 5> kRawClasses = {{
    {1, "tumor", {92, 38, 120}, 3.0, 4.5, 1.2},
    {2, "fibroblast", {168, 70, 140}, 2.0, 3.0, 2.2},
    {3, "lymphocyte", {40, 32, 128}, 1.6, 2.4, 1.0},
    {4, "plasma_cell", {64, 44, 150}, 2.0, 2.8, 1.3},
    {5, "macrophage", {130, 92, 160}, 2.5, 3.5, 1.1},
}};

constexpr std::string_view kTable =
    "# raw id / raw class name = superclass\n"
    "1 = TUMOR\n"
    "2 = STROMAL\n"
    "3 = STILS\n"
    "4 = STILS\n"
    "tumor = TUMOR\n"
    "fibroblast = STROMAL\n"
    "lymphocyte = STILS\n"
    "plasma_cell = STILS\n";

struct Tile {
  RgbImage image;
  ByteRaster mask;
  std::string csv;
};

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

Tile make_tile(SplitMix64& rng, int mask_h, int mask_w, int image_h, int image_w) {
  Tile tile{RgbImage(image_h, image_w, 3), ByteRaster(mask_h, mask_w, 3), {}};
  for (int y = 0; y < image_h; ++y) {
    for (int x = 0; x < image_w; ++x) {
      const double ripple = 8.0 * std::sin(0.45 * x + 0.3 * y);
      tile.image.at(y, x, 0) = clamp_byte(228 + ripple + rng.normal() * 6.0);
      tile.image.at(y, x, 1) = clamp_byte(168 + ripple + rng.normal() * 6.0);
      tile.image.at(y, x, 2) = clamp_byte(204 + rng.normal() * 6.0);
    }
  }

  tile.csv = "instance_id,raw_class,kind,xmin,ymin,xmax,ymax,coords\n";
  const int nuclei = std::clamp(mask_h * mask_w / 110, 3, 255);
  for (int k = 1; k <= nuclei; ++k) {
    const RawClass& raw = kRawClasses[rng.below(kRawClasses.size())];
    const double cy = rng.uniform(1.0, mask_h - 2.0);
    const double cx = rng.uniform(1.0, mask_w - 2.0);
    const double r = rng.uniform(raw.radius_lo, raw.radius_hi);
    const double ry = r;
    const double rx = r * raw.elongation;
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const bool bbox = k % 3 == 0;
    const std::uint32_t instance_id = 3u * static_cast<std::uint32_t>(k);

    const double reach = std::max(rx, ry) + 1.0;
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int y1 = std::min(mask_h - 1, static_cast<int>(std::ceil(cy + reach)));
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int x1 = std::min(mask_w - 1, static_cast<int>(std::ceil(cx + reach)));
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    auto inside = [&](int y, int x) {
      const double dy = y - cy;
      const double dx = x - cx;
      const double u = (dx * c + dy * s) / rx;
      const double v = (-dx * s + dy * c) / ry;
      return u * u + v * v <= 1.0;
    };

    int bx0 = mask_w, by0 = mask_h, bx1 = -1, by1 = -1;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (!inside(y, x)) continue;
        bx0 = std::min(bx0, x);
        by0 = std::min(by0, y);
        bx1 = std::max(bx1, x);
        by1 = std::max(by1, y);
        for (int ch = 0; ch < 3; ++ch) {
          tile.image.at(y, x, ch) = clamp_byte(raw.colour[ch] + rng.normal() * 10.0);
        }
      }
    }
    if (bx1 < 0) continue;

    for (int y = by0; y <= by1; ++y) {
      for (int x = bx0; x <= bx1; ++x) {
        if (!bbox && !inside(y, x)) continue;
        tile.mask.at(y, x, 0) = raw.id;
        tile.mask.at(y, x, 1) = static_cast<std::uint8_t>(k);
        tile.mask.at(y, x, 2) = 3;
      }
    }

    char line[256];
    if (bbox) {
      std::snprintf(line, sizeof line, "%u,%s,bbox,%d,%d,%d,%d,\n", instance_id, raw.name, bx0, by0,
                    bx1, by1);
      tile.csv += line;
    } else {
      std::string coords;
      for (int i = 0; i < 8; ++i) {
        const double a = i * std::numbers::pi / 4.0;
        const double px = cx + rx * std::cos(a) * c - ry * std::sin(a) * s;
        const double py = cy + rx * std::cos(a) * s + ry * std::sin(a) * c;
        const int ix = std::clamp(static_cast<int>(std::lround(px)), 0, mask_w - 1);
        const int iy = std::clamp(static_cast<int>(std::lround(py)), 0, mask_h - 1);
        if (!coords.empty()) coords += ';';
        coords += std::to_string(ix) + "," + std::to_string(iy);
      }
      std::snprintf(line, sizeof line, "%u,%s,polygon,,,,,\"%s\"\n", instance_id, raw.name,
                    coords.c_str());
      tile.csv += line;
    }
  }
  return tile;
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(kModule, ErrorCode::IoError, "cannot write " + path.string());
}

void write_set(const fs::path& root, std::string_view prefix, int count, int side,
               std::uint64_t seed, bool vary_shapes) {
  for (const char* sub : {"images", "masks", "localization"}) fs::create_directories(root / sub);
  for (int i = 0; i < count; ++i) {
    SplitMix64 rng(mix_seed({seed, static_cast<std::uint64_t>(prefix.front()), static_cast<std::uint64_t>(i)}));
    int mask_h = side;
    int mask_w = side;
    if (vary_shapes && i % 3 == 2) {
      mask_h -= static_cast<int>(1 + rng.below(5));
      mask_w -= static_cast<int>(rng.below(4));
    }
    const int image_h = mask_h + static_cast<int>(rng.below(4));
    const int image_w = mask_w + static_cast<int>(rng.below(4));
    const Tile tile = make_tile(rng, mask_h, mask_w, image_h, image_w);

    char id[32];
    std::snprintf(id, sizeof id, "%.*s%03d", static_cast<int>(prefix.size()), prefix.data(), i);
    write_png(root / "images" / (std::string(id) + ".png"), tile.image);
    write_png(root / "masks" / (std::string(id) + ".png"), tile.mask);
    write_text(root / "localization" / (std::string(id) + ".csv"), tile.csv);
  }
}

}  // namespace

void write_fixture(const FixtureConfig& config, const fs::path& single_root,
                   const fs::path& multi_root, const fs::path& table_path) {
  if (config.samples < 1 || config.side < 8 || config.side > 255 || config.multi_samples < 0) {
    throw Error(kModule, ErrorCode::BadConfig, "fixture needs samples >= 1 and side in [8,255]");
  }
  write_set(single_root, "s", config.samples, config.side, config.seed, true);
  if (!multi_root.empty() && config.multi_samples > 0) {
    write_set(multi_root, "m", config.multi_samples, config.side, config.seed, false);
  }
  if (table_path.has_parent_path()) fs::create_directories(table_path.parent_path());
  write_text(table_path, kTable);
}

}  // namespace histoseg
