// Copyright 2026 The mlaface Authors
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

#include "mlaface/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "mlaface/error.hpp"

namespace mlaface {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw_data_error("cannot read PNG '{}': {}", path.string(), img.message);
  }
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int channels = gray ? 1 : 3;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw_data_error("cannot decode PNG '{}': {}", path.string(), img.message);
  }
  Image out(static_cast<int>(img.height), static_cast<int>(img.width), channels);
  for (std::size_t i = 0; i < buffer.size(); ++i) out.data()[i] = buffer[i] / 255.0;
  return out;
}

Image read_rgb_png(const std::filesystem::path& path) {
  Image im = read_png(path);
  if (im.channels() == 3) return im;
  Image rgb(im.height(), im.width(), 3);
  for (int y = 0; y < im.height(); ++y)
    for (int x = 0; x < im.width(); ++x)
      for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = im.at(y, x);
  return rgb;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw_data_error("PNG export supports 1 or 3 channels, got {}", image.channels());
  }
  std::vector<std::uint8_t> buffer(image.size());
  std::transform(image.data().begin(), image.data().end(), buffer.begin(), to_byte);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = image.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw_data_error("cannot open '{}' for writing", path.string());
  if (!png_image_write_to_stdio(&img, file.get(), 0, buffer.data(), 0, nullptr)) {
    throw_data_error("cannot encode PNG '{}': {}", path.string(), img.message);
  }
}

void write_image_array(const Image& image, const std::filesystem::path& path) {
  ArrayContainer c;
  c.set_metadata(R"({"format":"mlaface-image"})");
  c.put_real("image",
             {static_cast<std::uint64_t>(image.height()), static_cast<std::uint64_t>(image.width()),
              static_cast<std::uint64_t>(image.channels())},
             image.data());
  c.save(path);
}

Image read_image_array(const std::filesystem::path& path) {
  const ArrayContainer c = ArrayContainer::load(path);
  const auto& a = c.real("image");
  if (a.shape.size() != 3) throw_data_error("image array must have rank 3");
  Image out(static_cast<int>(a.shape[0]), static_cast<int>(a.shape[1]),
            static_cast<int>(a.shape[2]));
  out.data() = a.values;
  return out;
}

Image apply_jet_colormap(const Image& scalar) {
  Image out(scalar.height(), scalar.width(), 3);
  for (int y = 0; y < scalar.height(); ++y) {
    for (int x = 0; x < scalar.width(); ++x) {
      const double v = std::clamp(scalar.at(y, x), 0.0, 1.0);
      out.at(y, x, 0) = std::clamp(1.5 - std::abs(4.0 * v - 3.0), 0.0, 1.0);
      out.at(y, x, 1) = std::clamp(1.5 - std::abs(4.0 * v - 2.0), 0.0, 1.0);
      out.at(y, x, 2) = std::clamp(1.5 - std::abs(4.0 * v - 1.0), 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace mlaface
