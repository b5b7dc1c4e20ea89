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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mlaface/backbone.hpp"
#include "mlaface/camera.hpp"
#include "mlaface/image.hpp"
#include "mlaface/losses.hpp"
#include "mlaface/morphable_model.hpp"

namespace mlaface {

struct AugmentConfig {
  bool enabled = true;
  double shift_probability = 0.5;
  double max_shift = 10.0;             // pixels, horizontal
  double max_rotation_degrees = 15.0;  // about the image centre
};

struct TrainConfig {
  int epochs = 1;
  int batch_size = 32;
  double learning_rate = 1e-4;
  double lr_decay = 0.1;
  int lr_decay_every = 10;  // epochs
  std::uint64_t seed = 0;
  int max_steps = 0;        // 0: no limit
  AugmentConfig augment;
  ArchConfig architecture;
  LossWeights loss;
  CameraModel camera;
  EmbeddingConfig embedding;

  // Throws a config error; the camera must match the network input size.
  void validate() const;
};

// lr * decay^floor(epoch / every)
double learning_rate(const TrainConfig& config, int epoch);

struct TrainingSample {
  std::string id;
  Image image;  // H x W x 3 in [0, 1]
  Landmarks2 landmarks = Landmarks2::Zero();
  std::optional<Image> skin_mask;  // H x W x 1, binary
};

// Lazily reads samples listed in a JSON-lines manifest with "image",
// "landmarks" and optional "mask" entries. Entries whose landmark file is
// missing or malformed are skipped and counted.
class ManifestDataset {
 public:
  explicit ManifestDataset(const std::filesystem::path& manifest);

  int size() const { return static_cast<int>(entries_.size()); }
  std::optional<TrainingSample> load(int index);
  int skipped() const { return skipped_; }

 private:
  struct Entry {
    std::string id;
    std::filesystem::path image, landmarks, mask;
  };
  std::vector<Entry> entries_;
  std::vector<bool> unreadable_;
  int skipped_ = 0;
};

struct Augmentation {
  double shift_x = 0.0;        // pixels
  double rotation = 0.0;       // radians, counter-clockwise on screen
};

Augmentation sample_augmentation(const AugmentConfig& config, std::mt19937_64& rng);

// Maps a pixel coordinate through the augmentation: rotation about the
// image centre followed by the shift.
Eigen::Vector2d augment_point(const Augmentation& a, const Eigen::Vector2d& p, int height, int width);

// Warps the image bilinearly and the mask with nearest-neighbour sampling;
// uncovered pixels become 0. Returns nullopt when a transformed landmark
// leaves the image.
std::optional<TrainingSample> apply_augmentation(const TrainingSample& sample, const Augmentation& a);

std::optional<TrainingSample> augment(const TrainingSample& sample, const AugmentConfig& config,
                                      std::mt19937_64& rng);

// Renders coefficients into a training sample: image over a constant
// background, projected landmarks and the render coverage as skin mask.
TrainingSample render_training_sample(const MorphableModel& model, const CoefficientVector& coefficients,
                                      const CameraModel& camera, double background = 0.0);

struct SynthesisRanges {
  double identity_std = 30.0;
  double expression_std = 15.0;
  double texture_std = 0.25;
  double max_yaw_degrees = 60.0;
  double max_pitch_degrees = 10.0;
  double max_roll_degrees = 10.0;
  double max_translation = 10.0;  // millimetres, x and y
  double ambient_min = 0.8;       // DC lighting as a multiple of neutral
  double ambient_max = 1.1;
  double lighting_std = 0.1;      // non-DC bands
};

CoefficientVector sample_face_coefficients(const SynthesisRanges& ranges, std::mt19937_64& rng);

struct SyntheticDatasetOptions {
  int count = 16;
  std::uint64_t seed = 0;
  double background = 0.0;
  SynthesisRanges ranges;
};

// Writes images/, masks/, landmarks/ and coefficients/ plus a manifest.jsonl
// whose records also carry "yaw" in degrees, so the same manifest serves
// training and alignment evaluation. Returns the manifest path.
std::filesystem::path write_synthetic_dataset(const MorphableModel& model, const CameraModel& camera,
                                              const SyntheticDatasetOptions& options,
                                              const std::filesystem::path& out_dir);

// Appends "step,pho,per,lmk,reg3dmm,refl,total" rows with 17 significant digits.
class LossLog {
 public:
  explicit LossLog(const std::filesystem::path& path);
  void append(long long step, const LossBreakdown& b);
  static std::string header();
  static std::string row(long long step, const LossBreakdown& b);

 private:
  std::ofstream out_;
};

struct StepResult {
  LossBreakdown loss;  // batch mean
  int empty_coverage = 0;
};

// One Adam update on a batch; returns the losses before the update.
StepResult train_step(Network& network, nn::Adam& optimizer, const ReconstructionObjective& objective,
                      std::span<const TrainingSample* const> batch, double lr);

struct TrainResult {
  std::vector<LossBreakdown> steps;
  int skipped_entries = 0;       // unreadable landmark files
  int skipped_augmentations = 0; // landmarks left the image
  int empty_coverage = 0;
  std::vector<std::filesystem::path> checkpoints;
};

// Writes loss.csv and checkpoint_epochNNN.bin into out_dir; the last
// checkpoint is also written as checkpoint.bin.
TrainResult train(const TrainConfig& config, const MorphableModel& model, ManifestDataset& dataset,
                  const std::filesystem::path& out_dir);

// Repeated updates on a single sample without augmentation. Returns the
// loss before each step.
std::vector<LossBreakdown> overfit_single_image(const TrainConfig& config, const MorphableModel& model,
                                                const TrainingSample& sample, int steps);

}  // namespace mlaface
