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

#include "histoseg/image_io.hpp"

#include <png.h>

#include <cstring>

#include "histoseg/errors.hpp"

namespace histoseg {

namespace {

constexpr std::string_view kModule = "image_io";

png_uint_32 format_for(int channels) {
  switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 3: return PNG_FORMAT_RGB;
    default: throw Error(kModule, ErrorCode::FormatError,
                         "unsupported channel count " + std::to_string(channels));
  }
}

}  // namespace

ByteRaster read_png(const std::filesystem::path& path, int channels) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw Error(kModule, ErrorCode::IoError, path.string() + ": " + image.message);
  }
  image.format = format_for(channels);
  ByteRaster out(static_cast<int>(image.height), static_cast<int>(image.width), channels);
  if (png_image_finish_read(&image, nullptr, out.data().data(), 0, nullptr) == 0) {
    png_image_free(&image);
    throw Error(kModule, ErrorCode::IoError, path.string() + ": " + image.message);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const ByteRaster& raster) {
  if (raster.empty()) {
    throw Error(kModule, ErrorCode::FormatError, "refusing to write empty image " + path.string());
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width());
  image.height = static_cast<png_uint_32>(raster.height());
  image.format = format_for(raster.channels());
  if (png_image_write_to_file(&image, path.c_str(), 0, raster.data().data(), 0, nullptr) == 0) {
    throw Error(kModule, ErrorCode::IoError, path.string() + ": " + image.message);
  }
}

}  // namespace histoseg
