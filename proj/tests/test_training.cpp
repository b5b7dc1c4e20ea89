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

#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mlaface/error.hpp"
#include "mlaface/io.hpp"
#include "mlaface/training.hpp"
#include "support/fixtures.hpp"

namespace mlaface {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrainConfig small_config(int size) {
  TrainConfig c;
  c.architecture = ArchConfig::tiny(size);
  c.camera = testing::small_camera(size);
  c.embedding.grid = 8;
  c.embedding.dims = 32;
  c.batch_size = 2;
  c.learning_rate = 1e-3;
  return c;
}

TEST(Schedule, StepDecay) {
  TrainConfig c;
  c.learning_rate = 1e-4;
  EXPECT_DOUBLE_EQ(learning_rate(c, 0), 1e-4);
  EXPECT_DOUBLE_EQ(learning_rate(c, 9), 1e-4);
  EXPECT_DOUBLE_EQ(learning_rate(c, 10), 1e-5);
  EXPECT_NEAR(learning_rate(c, 25), 1e-6, 1e-21);
}

TEST(TrainConfigValidation, CameraMustMatchInput) {
  TrainConfig c = small_config(32);
  EXPECT_NO_THROW(c.validate());
  c.camera = testing::small_camera(64);
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  c = small_config(32);
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Augmentation, PointMapRotatesAboutCentreThenShifts) {
  Augmentation a;
  a.rotation = std::numbers::pi / 2.0;
  const Eigen::Vector2d c(16.0, 12.0);
  EXPECT_LT((augment_point(a, c, 24, 32) - c).norm(), 1e-12);
  // A point right of centre moves above it (y down) for a positive angle.
  EXPECT_LT((augment_point(a, c + Eigen::Vector2d(5, 0), 24, 32) - (c + Eigen::Vector2d(0, -5))).norm(), 1e-12);
  a.rotation = 0.0;
  a.shift_x = 3.5;
  EXPECT_EQ(augment_point(a, Eigen::Vector2d(1, 2), 24, 32), Eigen::Vector2d(4.5, 2));
}

TrainingSample patterned_sample(int h, int w) {
  TrainingSample s;
  s.id = "p";
  s.image = Image(h, w, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) s.image.at(y, x, c) = std::fmod(0.01 * (x * 7 + y * 3 + c), 1.0);
  s.skin_mask = Image(h, w, 1);
  for (int y = h / 4; y < 3 * h / 4; ++y)
    for (int x = w / 4; x < 3 * w / 4; ++x) s.skin_mask->at(y, x) = 1.0;
  for (int i = 0; i < kNumLandmarks; ++i) s.landmarks.row(i) << w / 2.0 + (i % 9) - 4, h / 2.0 + (i / 9) - 4;
  return s;
}

TEST(Augmentation, IdentityLeavesSampleUnchanged) {
  const TrainingSample s = patterned_sample(20, 24);
  const auto out = apply_augmentation(s, Augmentation{});
  ASSERT_TRUE(out);
  EXPECT_EQ(out->image.data(), s.image.data());
  EXPECT_EQ(out->skin_mask->data(), s.skin_mask->data());
  EXPECT_EQ(out->landmarks, s.landmarks);
}

TEST(Augmentation, IntegerShiftMovesPixelsAndZeroFills) {
  const TrainingSample s = patterned_sample(20, 24);
  Augmentation a;
  a.shift_x = 3.0;
  const auto out = apply_augmentation(s, a);
  ASSERT_TRUE(out);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 24; ++x)
      for (int c = 0; c < 3; ++c) {
        const double expected = x >= 3 ? s.image.at(y, x - 3, c) : 0.0;
        EXPECT_NEAR(out->image.at(y, x, c), expected, 1e-12);
      }
  for (int i = 0; i < kNumLandmarks; ++i) EXPECT_EQ(out->landmarks(i, 0), s.landmarks(i, 0) + 3.0);
}

TEST(Augmentation, RotatedMaskStaysBinary) {
  const TrainingSample s = patterned_sample(32, 32);
  Augmentation a;
  a.rotation = 0.2;
  a.shift_x = -2.5;
  const auto out = apply_augmentation(s, a);
  ASSERT_TRUE(out);
  for (double v : out->skin_mask->data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(Augmentation, LandmarkLeavingImageSkipsSample) {
  TrainingSample s = patterned_sample(20, 20);
  s.landmarks(5, 0) = 19.0;
  Augmentation a;
  a.shift_x = 2.0;
  EXPECT_FALSE(apply_augmentation(s, a));
}

TEST(Augmentation, SamplingRangesAndDeterminism) {
  AugmentConfig cfg;
  std::mt19937_64 rng(1), rng2(1);
  int shifted = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const Augmentation a = sample_augmentation(cfg, rng);
    const Augmentation b = sample_augmentation(cfg, rng2);
    EXPECT_EQ(a.shift_x, b.shift_x);
    EXPECT_EQ(a.rotation, b.rotation);
    EXPECT_LE(std::abs(a.shift_x), 10.0);
    EXPECT_LE(std::abs(a.rotation), 15.0 * std::numbers::pi / 180.0);
    if (a.shift_x != 0.0) ++shifted;
  }
  EXPECT_NEAR(static_cast<double>(shifted) / n, 0.5, 0.04);
  cfg.enabled = false;
  const Augmentation off = sample_augmentation(cfg, rng);
  EXPECT_EQ(off.shift_x, 0.0);
  EXPECT_EQ(off.rotation, 0.0);
}

TEST(LossLog, RowsUseSeventeenSignificantDigits) {
  LossBreakdown b;
  b.photometric = 0.1;
  b.total = 1.0 / 3.0;
  const std::string row = LossLog::row(7, b);
  EXPECT_EQ(row, "7,0.10000000000000001,0,0,0,0,0.33333333333333331");
  EXPECT_EQ(LossLog::header(), "step,pho,per,lmk,reg3dmm,refl,total");
}

TEST(Dataset, SyntheticDatasetRoundTripsAndIsDeterministic) {
  const auto& model = testing::toy_model();
  const CameraModel cam = testing::small_camera(32);
  SyntheticDatasetOptions opts;
  opts.count = 3;
  opts.seed = 4;
  const auto a = write_synthetic_dataset(model, cam, opts, testing::scratch_dir("synth_a"));
  const auto b = write_synthetic_dataset(model, cam, opts, testing::scratch_dir("synth_b"));
  EXPECT_EQ(slurp(a), slurp(b));
  ManifestDataset ds(a);
  ASSERT_EQ(ds.size(), 3);
  const auto s = ds.load(1);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->image.height(), 32);
  EXPECT_TRUE(s->skin_mask.has_value());
  EXPECT_EQ(s->landmarks, read_landmarks(a.parent_path() / "landmarks" / "00001.txt"));
}

TEST(Dataset, UnreadableLandmarksAreSkippedAndCountedOnce) {
  const auto& model = testing::toy_model();
  SyntheticDatasetOptions opts;
  opts.count = 2;
  const auto dir = testing::scratch_dir("synth_skip");
  const auto manifest = write_synthetic_dataset(model, testing::small_camera(32), opts, dir);
  std::ofstream(dir / "landmarks" / "00000.txt") << "1 2\n3\n";
  ManifestDataset ds(manifest);
  EXPECT_FALSE(ds.load(0));
  EXPECT_FALSE(ds.load(0));
  EXPECT_TRUE(ds.load(1));
  EXPECT_EQ(ds.skipped(), 1);
}

TEST(Training, FirstStepIsBitwiseReproducible) {
  const auto& model = testing::toy_model();
  SyntheticDatasetOptions opts;
  opts.count = 4;
  const auto manifest = write_synthetic_dataset(model, testing::small_camera(32), opts, testing::scratch_dir("det"));
  TrainConfig cfg = small_config(32);
  cfg.seed = 42;
  cfg.max_steps = 2;
  ManifestDataset d1(manifest), d2(manifest);
  const auto r1 = train(cfg, model, d1, testing::scratch_dir("det_run1"));
  const auto r2 = train(cfg, model, d2, testing::scratch_dir("det_run2"));
  ASSERT_EQ(r1.steps.size(), 2u);
  EXPECT_EQ(LossLog::row(0, r1.steps[0]), LossLog::row(0, r2.steps[0]));
  EXPECT_EQ(slurp(std::filesystem::temp_directory_path() / "mlaface_test_det_run1" / "loss.csv"),
            slurp(std::filesystem::temp_directory_path() / "mlaface_test_det_run2" / "loss.csv"));
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::temp_directory_path() / "mlaface_test_det_run1" /
                                      "checkpoint.bin"));
  cfg.seed = 43;
  ManifestDataset d3(manifest);
  const auto r3 = train(cfg, model, d3, testing::scratch_dir("det_run3"));
  EXPECT_NE(LossLog::row(0, r1.steps[0]), LossLog::row(0, r3.steps[0]));
}

TEST(Training, OverfitLossDecreases) {
  const auto& model = testing::toy_model();
  TrainConfig cfg = small_config(32);
  CoefficientVector c;
  for (int ch = 0; ch < 3; ++ch) c.lighting.values[ch * kShBands] = 0.9 / sh_constants::kBand0;
  c.pose.euler_angles[1] = 0.3;
  const TrainingSample s = render_training_sample(model, c, cfg.camera);
  const auto history = overfit_single_image(cfg, model, s, 30);
  ASSERT_EQ(history.size(), 30u);
  EXPECT_LT(history.back().total, 0.5 * history.front().total);
}

}  // namespace
}  // namespace mlaface
