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

#pragma once

#include <filesystem>
#include <vector>

#include "mlaface/container.hpp"

namespace mlaface {

// Interleaved H x W x C image of doubles, row-major. Colour images use
// C = 3 with values in [0,1]; masks use C = 1.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  double& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// 8-bit PNG. Values are clamped to [0,1] and stored as round(255 * v).
// Gray, gray+alpha, RGB and RGBA files are read; alpha is dropped.
Image read_png(const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path);
// read_png() with gray images expanded to three equal channels.
Image read_rgb_png(const std::filesystem::path& path);

// Raw float image stored as a single "image" array of shape (H, W, C).
void write_image_array(const Image& image, const std::filesystem::path& path);
Image read_image_array(const std::filesystem::path& path);

// Maps a scalar field in [0,1] onto an RGB "jet" colormap.
Image apply_jet_colormap(const Image& scalar);

}  // namespace mlaface
