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

#include "mlaface/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "mlaface/embedding.hpp"
#include "mlaface/error.hpp"
#include "mlaface/face_render.hpp"
#include "mlaface/io.hpp"

namespace mlaface {

namespace {

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.photometric) && std::isfinite(b.perceptual) && std::isfinite(b.landmark) &&
         std::isfinite(b.coefficient) && std::isfinite(b.reflectance) && std::isfinite(b.total);
}

void accumulate(LossBreakdown& acc, const LossBreakdown& b, double w) {
  acc.photometric += w * b.photometric;
  acc.perceptual += w * b.perceptual;
  acc.landmark += w * b.landmark;
  acc.coefficient += w * b.coefficient;
  acc.reflectance += w * b.reflectance;
  acc.total += w * b.total;
}

double bilinear(const Image& im, double x, double y, int c) {
  // x, y in pixel-index coordinates (centre of pixel i at i).
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double tx = x - x0, ty = y - y0;
  auto at = [&](int yy, int xx) {
    return (xx >= 0 && xx < im.width() && yy >= 0 && yy < im.height()) ? im.at(yy, xx, c) : 0.0;
  };
  return (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
         ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
}

}  // namespace

// ------------------------------------------------------------- config

void TrainConfig::validate() const {
  if (epochs <= 0) throw_config_error("train.epochs must be positive, got {}", epochs);
  if (batch_size <= 0) throw_config_error("train.batch_size must be positive, got {}", batch_size);
  if (!(learning_rate > 0.0)) throw_config_error("train.learning_rate must be positive");
  if (!(lr_decay > 0.0)) throw_config_error("train.lr_decay must be positive");
  if (lr_decay_every <= 0) throw_config_error("train.lr_decay_every must be positive");
  if (max_steps < 0) throw_config_error("train.max_steps must be >= 0");
  if (!(augment.shift_probability >= 0.0 && augment.shift_probability <= 1.0)) {
    throw_config_error("train.shift_probability must lie in [0, 1]");
  }
  if (!(augment.max_shift >= 0.0) || !(augment.max_rotation_degrees >= 0.0)) {
    throw_config_error("augmentation ranges must be >= 0");
  }
  architecture.validate();
  loss.validate();
  camera.validate();
  if (camera.height != architecture.input_size || camera.width != architecture.input_size) {
    throw_config_error("camera image {}x{} must match the network input size {}", camera.height, camera.width,
                       architecture.input_size);
  }
  if (embedding.grid <= 0 || embedding.dims <= 0 || embedding.grid > camera.height) {
    throw_config_error("embedding grid must lie in [1, {}] and dims must be positive", camera.height);
  }
}

double learning_rate(const TrainConfig& config, int epoch) {
  return config.learning_rate * std::pow(config.lr_decay, epoch / config.lr_decay_every);
}

// ------------------------------------------------------------ dataset

ManifestDataset::ManifestDataset(const std::filesystem::path& manifest) {
  int line = 0;
  for (const auto& rec : read_jsonl(manifest)) {
    ++line;
    Entry e;
    try {
      e.image = resolve_path(manifest, rec.at("image").get<std::string>());
      e.landmarks = resolve_path(manifest, rec.at("landmarks").get<std::string>());
      if (rec.contains("mask") && !rec.at("mask").is_null()) {
        e.mask = resolve_path(manifest, rec.at("mask").get<std::string>());
      }
      e.id = rec.value("id", e.image.filename().string());
    } catch (const nlohmann::json::exception& ex) {
      throw_data_error("{}: record {}: {}", manifest.string(), line, ex.what());
    }
    entries_.push_back(std::move(e));
  }
  unreadable_.assign(entries_.size(), false);
}

std::optional<TrainingSample> ManifestDataset::load(int index) {
  const Entry& e = entries_.at(static_cast<std::size_t>(index));
  TrainingSample s;
  s.id = e.id;
  try {
    s.landmarks = read_landmarks(e.landmarks);
  } catch (const Error&) {
    if (!unreadable_[static_cast<std::size_t>(index)]) {
      unreadable_[static_cast<std::size_t>(index)] = true;
      ++skipped_;
    }
    return std::nullopt;
  }
  s.image = read_rgb_png(e.image);
  if (!e.mask.empty()) {
    Image m = read_png(e.mask);
    if (m.channels() != 1) {
      Image gray(m.height(), m.width(), 1);
      for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) gray.at(y, x) = m.at(y, x, 0);
      m = std::move(gray);
    }
    for (double& v : m.data()) v = v >= 0.5 ? 1.0 : 0.0;
    if (m.height() != s.image.height() || m.width() != s.image.width()) {
      throw_data_error("mask {} does not match image size", e.mask.string());
    }
    s.skin_mask = std::move(m);
  }
  return s;
}

// ------------------------------------------------------- augmentation

Augmentation sample_augmentation(const AugmentConfig& config, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Augmentation a;
  if (!config.enabled) return a;
  const bool shift = unit(rng) < config.shift_probability;
  const double s = (2.0 * unit(rng) - 1.0) * config.max_shift;
  const double r = (2.0 * unit(rng) - 1.0) * config.max_rotation_degrees;
  if (shift) a.shift_x = s;
  a.rotation = r * std::numbers::pi / 180.0;
  return a;
}

Eigen::Vector2d augment_point(const Augmentation& a, const Eigen::Vector2d& p, int height, int width) {
  const Eigen::Vector2d c(width / 2.0, height / 2.0);
  const double cs = std::cos(a.rotation), sn = std::sin(a.rotation);
  const Eigen::Vector2d d = p - c;
  return c + Eigen::Vector2d(cs * d.x() + sn * d.y(), -sn * d.x() + cs * d.y()) + Eigen::Vector2d(a.shift_x, 0.0);
}

std::optional<TrainingSample> apply_augmentation(const TrainingSample& sample, const Augmentation& a) {
  const int h = sample.image.height(), w = sample.image.width();
  TrainingSample out;
  out.id = sample.id;
  for (int i = 0; i < kNumLandmarks; ++i) {
    const Eigen::Vector2d p = augment_point(a, sample.landmarks.row(i).transpose(), h, w);
    if (!(p.x() >= 0.0 && p.x() < w && p.y() >= 0.0 && p.y() < h)) return std::nullopt;
    out.landmarks.row(i) = p.transpose();
  }
  // Inverse map from output pixel centres back into the source.
  const Eigen::Vector2d c(w / 2.0, h / 2.0);
  const double cs = std::cos(a.rotation), sn = std::sin(a.rotation);
  out.image = Image(h, w, sample.image.channels());
  if (sample.skin_mask) out.skin_mask = Image(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector2d d = Eigen::Vector2d(x + 0.5 - a.shift_x, y + 0.5) - c;
      const Eigen::Vector2d src = c + Eigen::Vector2d(cs * d.x() - sn * d.y(), sn * d.x() + cs * d.y());
      for (int ch = 0; ch < sample.image.channels(); ++ch) {
        out.image.at(y, x, ch) = bilinear(sample.image, src.x() - 0.5, src.y() - 0.5, ch);
      }
      if (sample.skin_mask) {
        const int sx = static_cast<int>(std::floor(src.x())), sy = static_cast<int>(std::floor(src.y()));
        if (sx >= 0 && sx < w && sy >= 0 && sy < h) out.skin_mask->at(y, x) = sample.skin_mask->at(sy, sx);
      }
    }
  }
  return out;
}

std::optional<TrainingSample> augment(const TrainingSample& sample, const AugmentConfig& config,
                                      std::mt19937_64& rng) {
  return apply_augmentation(sample, sample_augmentation(config, rng));
}

TrainingSample render_training_sample(const MorphableModel& model, const CoefficientVector& coefficients,
                                      const CameraModel& camera, double background) {
  const FaceRenderState state = render_face(model, coefficients, camera);
  TrainingSample s;
  s.image = state.render.image;
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x)
      if (state.render.mask.at(y, x) == 0.0)
        for (int c = 0; c < 3; ++c) s.image.at(y, x, c) = background;
  s.landmarks = state.landmarks;
  s.skin_mask = state.render.mask;
  return s;
}

CoefficientVector sample_face_coefficients(const SynthesisRanges& r, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  constexpr double kDeg = std::numbers::pi / 180.0;
  CoefficientVector c;
  for (int i = 0; i < kIdentityDims; ++i) c.identity.values[i] = r.identity_std * normal(rng);
  for (int i = 0; i < kExpressionDims; ++i) c.expression.values[i] = r.expression_std * normal(rng);
  for (int i = 0; i < kTextureDims; ++i) c.texture.values[i] = r.texture_std * normal(rng);
  c.pose.euler_angles = Eigen::Vector3d(r.max_pitch_degrees * unit(rng), r.max_yaw_degrees * unit(rng),
                                        r.max_roll_degrees * unit(rng)) * kDeg;
  c.pose.translation = Eigen::Vector3d(r.max_translation * unit(rng), r.max_translation * unit(rng), 0.0);
  std::uniform_real_distribution<double> ambient(r.ambient_min, r.ambient_max);
  const double dc = ambient(rng) / sh_constants::kBand0;
  for (int ch = 0; ch < 3; ++ch) {
    c.lighting.values[ch * kShBands] = dc;
    for (int b = 1; b < kShBands; ++b) c.lighting.values[ch * kShBands + b] = r.lighting_std * normal(rng);
  }
  return c;
}

std::filesystem::path write_synthetic_dataset(const MorphableModel& model, const CameraModel& camera,
                                              const SyntheticDatasetOptions& options,
                                              const std::filesystem::path& out_dir) {
  if (options.count < 1) throw_config_error("synthetic dataset needs count >= 1, got {}", options.count);
  namespace fs = std::filesystem;
  for (const char* sub : {"images", "masks", "landmarks", "coefficients"}) fs::create_directories(out_dir / sub);
  std::mt19937_64 rng(options.seed);
  const fs::path manifest = out_dir / "manifest.jsonl";
  std::string lines;
  for (int i = 0; i < options.count; ++i) {
    const std::string id = fmt::format("{:05d}", i);
    const CoefficientVector c = sample_face_coefficients(options.ranges, rng);
    const TrainingSample s = render_training_sample(model, c, camera, options.background);
    write_png(s.image, out_dir / "images" / (id + ".png"));
    write_png(*s.skin_mask, out_dir / "masks" / (id + ".png"));
    write_landmarks(s.landmarks, out_dir / "landmarks" / (id + ".txt"));
    write_coefficients(c, out_dir / "coefficients" / (id + ".json"));
    const nlohmann::json rec = {{"id", id},
                                {"image", "images/" + id + ".png"},
                                {"mask", "masks/" + id + ".png"},
                                {"landmarks", "landmarks/" + id + ".txt"},
                                {"coefficients", "coefficients/" + id + ".json"},
                                {"yaw", c.pose.euler_angles[1] * 180.0 / std::numbers::pi}};
    lines += rec.dump() + "\n";
  }
  write_text(manifest, lines);
  return manifest;
}

// ------------------------------------------------------------ logging

LossLog::LossLog(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
  if (!out_) throw_data_error("cannot write loss log {}", path.string());
  out_ << header() << '\n';
}

std::string LossLog::header() { return "step,pho,per,lmk,reg3dmm,refl,total"; }

std::string LossLog::row(long long step, const LossBreakdown& b) {
  return fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}", step, b.photometric, b.perceptual,
                     b.landmark, b.coefficient, b.reflectance, b.total);
}

void LossLog::append(long long step, const LossBreakdown& b) {
  out_ << row(step, b) << '\n';
  out_.flush();
}

// ----------------------------------------------------------- training

StepResult train_step(Network& network, nn::Adam& optimizer, const ReconstructionObjective& objective,
                      std::span<const TrainingSample* const> batch, double lr) {
  if (batch.empty()) throw_data_error("empty training batch");
  std::vector<const Image*> images;
  for (const TrainingSample* s : batch) images.push_back(&s->image);
  NetworkCache cache;
  const nn::Tensor out = network.forward(images_to_tensor(images), &cache);
  nn::Tensor grad(out.n(), out.c(), 1, 1);
  StepResult r;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const TrainingSample& s = *batch[n];
    const CoefficientVector coeffs =
        split_coefficients(std::span<const double>(out.sample(static_cast<int>(n)), kCoefficientCount));
    ObjectiveTarget target;
    target.image = &s.image;
    target.landmarks = &s.landmarks;
    target.skin_mask = s.skin_mask ? &*s.skin_mask : nullptr;
    const ObjectiveResult res = objective.evaluate(coeffs, target, true);
    if (!finite(res.breakdown) || !res.gradient.allFinite()) {
      throw_numeric_error("non-finite loss or gradient for sample '{}'", s.id);
    }
    accumulate(r.loss, res.breakdown, inv);
    if (res.empty_coverage) ++r.empty_coverage;
    Eigen::Map<CoefficientArray>(grad.sample(static_cast<int>(n))) = res.gradient * inv;
  }
  optimizer.zero_grad();
  network.backward(cache, grad);
  network.update_running_statistics(cache);
  optimizer.step(lr);
  return r;
}

TrainResult train(const TrainConfig& config, const MorphableModel& model, ManifestDataset& dataset,
                  const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  Network network(config.architecture, config.seed);
  nn::Adam optimizer(network.parameters());
  const RandomProjectionEmbedding embedding(config.embedding.seed, config.embedding.grid, config.embedding.dims);
  const ReconstructionObjective objective(model, config.camera, embedding, config.loss);
  std::mt19937_64 rng(config.seed);
  LossLog log(out_dir / "loss.csv");

  TrainResult result;
  long long step = 0;
  bool done = false;
  for (int epoch = 0; epoch < config.epochs && !done; ++epoch) {
    std::vector<int> order(static_cast<std::size_t>(dataset.size()));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = learning_rate(config, epoch);

    std::vector<TrainingSample> batch;
    auto flush = [&]() {
      if (batch.empty()) return;
      std::vector<const TrainingSample*> ptrs;
      for (const auto& s : batch) ptrs.push_back(&s);
      const StepResult r = train_step(network, optimizer, objective, ptrs, lr);
      log.append(step, r.loss);
      result.steps.push_back(r.loss);
      result.empty_coverage += r.empty_coverage;
      ++step;
      batch.clear();
      if (config.max_steps > 0 && step >= config.max_steps) done = true;
    };
    for (int index : order) {
      if (done) break;
      std::optional<TrainingSample> s = dataset.load(index);
      if (!s) continue;
      if (s->image.height() != config.camera.height || s->image.width() != config.camera.width) {
        throw_data_error("sample '{}' is {}x{}, expected {}x{}", s->id, s->image.height(), s->image.width(),
                         config.camera.height, config.camera.width);
      }
      std::optional<TrainingSample> a = augment(*s, config.augment, rng);
      if (!a) {
        ++result.skipped_augmentations;
        continue;
      }
      batch.push_back(std::move(*a));
      if (static_cast<int>(batch.size()) == config.batch_size) flush();
    }
    if (!done) flush();
    const auto path = out_dir / fmt::format("checkpoint_epoch{:03d}.bin", epoch + 1);
    save_checkpoint(path, network, model, config.camera, config.embedding, epoch + 1);
    result.checkpoints.push_back(path);
  }
  if (!result.checkpoints.empty()) {
    std::filesystem::copy_file(result.checkpoints.back(), out_dir / "checkpoint.bin",
                               std::filesystem::copy_options::overwrite_existing);
  }
  result.skipped_entries = dataset.skipped();
  if (result.steps.empty()) throw_data_error("no usable training samples");
  return result;
}

std::vector<LossBreakdown> overfit_single_image(const TrainConfig& config, const MorphableModel& model,
                                                const TrainingSample& sample, int steps) {
  config.validate();
  if (steps <= 0) throw_config_error("overfit steps must be positive");
  Network network(config.architecture, config.seed);
  nn::Adam optimizer(network.parameters());
  const RandomProjectionEmbedding embedding(config.embedding.seed, config.embedding.grid, config.embedding.dims);
  const ReconstructionObjective objective(model, config.camera, embedding, config.loss);
  std::vector<LossBreakdown> history;
  const TrainingSample* batch[] = {&sample};
  for (int i = 0; i < steps; ++i) {
    history.push_back(train_step(network, optimizer, objective, batch, config.learning_rate).loss);
  }
  return history;
}

}  // namespace mlaface
