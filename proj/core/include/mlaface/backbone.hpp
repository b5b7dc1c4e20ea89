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

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlaface/attention.hpp"
#include "mlaface/camera.hpp"
#include "mlaface/coefficients.hpp"
#include "mlaface/container.hpp"
#include "mlaface/image.hpp"
#include "mlaface/morphable_model.hpp"
#include "mlaface/nn/layers.hpp"

namespace mlaface {

inline constexpr int kStages = 4;

struct ArchConfig {
  int input_size = 224;
  int stem_channels = 64;
  std::array<int, kStages> stage_channels{256, 512, 1024, 2048};
  std::array<int, kStages> blocks{3, 4, 6, 3};
  int expansion = 4;
  std::array<bool, kStages> hsca{true, true, true, true};
  bool pafb = true;
  int reduction = 4;
  double head_init_std = 1e-3;

  // 50-layer bottleneck network.
  static ArchConfig full();
  // Desk-scale network: channels [8, 16, 32, 64], one block per stage.
  static ArchConfig tiny(int input_size = 224);

  // Throws a config error for inconsistent schedules.
  void validate() const;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static ArchConfig from_json(const nlohmann::json& j);

  bool operator==(const ArchConfig&) const = default;
};

class Bottleneck {
 public:
  struct Cache {
    nn::Conv2d::Cache conv1, conv2, conv3, shortcut;
    nn::BatchNorm2d::Cache bn1, bn2, bn3, shortcut_bn;
    nn::Tensor a1, a2;  // after the first and second ReLU
    Hsca::Cache hsca;
    nn::Tensor out;     // after the final ReLU
  };

  Bottleneck(const std::string& name, int in_channels, int out_channels, int stride, int expansion,
             bool use_hsca, int reduction);

  void init(std::mt19937_64& rng);
  nn::Tensor forward(const nn::Tensor& x, Cache* cache) const;
  nn::Tensor backward(const Cache& cache, const nn::Tensor& grad_out);
  void update_running_statistics(const Cache& cache);
  void collect(nn::ParameterList& params);
  void collect_buffers(nn::ParameterList& buffers);

  bool has_hsca() const { return use_hsca_; }
  bool has_projection() const { return projection_; }

  nn::Conv2d conv1;  // 1x1 reduce
  nn::BatchNorm2d bn1;
  nn::Conv2d conv2;  // 3x3, carries the stride
  nn::BatchNorm2d bn2;
  Hsca hsca;
  nn::Conv2d conv3;  // 1x1 expand
  nn::BatchNorm2d bn3;
  nn::Conv2d shortcut;
  nn::BatchNorm2d shortcut_bn;

 private:
  bool use_hsca_;
  bool projection_;
};

struct NetworkCache {
  nn::Conv2d::Cache stem;
  nn::BatchNorm2d::Cache stem_bn;
  nn::Tensor stem_out;  // after ReLU
  nn::MaxPoolCache pool;
  std::array<std::vector<Bottleneck::Cache>, kStages> blocks;
  std::array<nn::Tensor, kStages> stage_outputs;
  std::array<Pafb::Cache, kStages - 1> fusion;
  int head_h = 0, head_w = 0;
  nn::Linear::Cache fc;
};

// Residual coefficient regressor: stem, four bottleneck stages, an optional
// fusion chain over the stage outputs, global pooling and a 257-way linear
// head.
class Network {
 public:
  Network(const ArchConfig& config, std::uint64_t seed);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const ArchConfig& config() const { return config_; }

  // images: N x 3 x S x S with S = config().input_size. Returns N x 257 x 1 x 1.
  nn::Tensor forward(const nn::Tensor& images, NetworkCache* cache) const;
  // Accumulates parameter gradients from d(loss)/d(output).
  void backward(const NetworkCache& cache, const nn::Tensor& grad_out);
  void update_running_statistics(const NetworkCache& cache);

  // Stage outputs at 1/4, 1/8, 1/16 and 1/32 of the input (inference mode).
  std::array<nn::Tensor, kStages> stage_features(const nn::Tensor& images) const;

  CoefficientVector predict(const Image& image) const;

  nn::ParameterList parameters();
  nn::ParameterList buffers();
  void zero_grad();

  // Writes "net/<name>" arrays for every parameter and buffer.
  void store(ArrayContainer& container) const;
  // Throws a data error on missing arrays or shape mismatches.
  void restore(const ArrayContainer& container);

  // Exposed for tests.
  std::vector<std::vector<Bottleneck>>& stages() { return stages_; }
  std::vector<Pafb>& fusion() { return fusion_; }
  nn::Linear& head() { return fc_; }

 private:
  ArchConfig config_;
  nn::Conv2d stem_;
  nn::BatchNorm2d stem_bn_;
  std::vector<std::vector<Bottleneck>> stages_;
  std::vector<Pafb> fusion_;
  nn::Linear fc_;
};

// H x W x 3 image -> 1 x 3 x H x W tensor.
nn::Tensor image_to_tensor(const Image& image);
nn::Tensor images_to_tensor(const std::vector<const Image*>& images);

// Class-activation heatmaps per stage: channels weighted by their global
// average, summed, bilinearly upsampled to the input size and min-max
// normalized to [0, 1]. Output images are S x S x 1.
std::array<Image, kStages> feature_activation_maps(const Network& network, const Image& image);

// Bilinear resize of a single-channel map (half-pixel centres).
Image resize_bilinear(const Image& map, int height, int width);

struct EmbeddingConfig {
  std::uint64_t seed = 7;
  int grid = 16;
  int dims = 128;
  bool operator==(const EmbeddingConfig&) const = default;
};

nlohmann::json camera_to_json(const CameraModel& camera);
CameraModel camera_from_json(const nlohmann::json& j);

// A trained regressor together with everything needed to render its output.
// The file also embeds the morphable model arrays, so load_model() accepts
// checkpoints.
struct Checkpoint {
  ArchConfig architecture;
  CameraModel camera;
  EmbeddingConfig embedding;
  int epoch = 0;
  std::unique_ptr<Network> network;
  std::unique_ptr<MorphableModel> model;
};

void save_checkpoint(const std::filesystem::path& path, const Network& network, const MorphableModel& model,
                     const CameraModel& camera, const EmbeddingConfig& embedding, int epoch);
// When expected is given, a checkpoint with a different architecture is
// refused with a config error.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchConfig* expected = nullptr);

}  // namespace mlaface
