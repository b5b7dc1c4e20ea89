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

#include "mlaface/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "mlaface/error.hpp"
#include "mlaface/illumination.hpp"
#include "mlaface/json_util.hpp"

namespace mlaface {

using nn::Tensor;
using json = nlohmann::json;

// ------------------------------------------------------------ ArchConfig

ArchConfig ArchConfig::full() { return ArchConfig{}; }

ArchConfig ArchConfig::tiny(int input_size) {
  ArchConfig c;
  c.input_size = input_size;
  c.stem_channels = 8;
  c.stage_channels = {8, 16, 32, 64};
  c.blocks = {1, 1, 1, 1};
  c.expansion = 2;
  return c;
}

void ArchConfig::validate() const {
  if (input_size <= 0 || input_size % 32 != 0) {
    throw_config_error("architecture input_size must be a positive multiple of 32, got {}", input_size);
  }
  if (stem_channels <= 0) throw_config_error("stem_channels must be positive");
  if (expansion <= 0) throw_config_error("expansion must be positive");
  if (reduction <= 0) throw_config_error("reduction must be positive");
  if (!(head_init_std >= 0.0)) throw_config_error("head_init_std must be >= 0");
  for (int s = 0; s < kStages; ++s) {
    if (blocks[s] <= 0) throw_config_error("stage {} needs at least one block", s + 1);
    if (stage_channels[s] <= 0 || stage_channels[s] % expansion != 0) {
      throw_config_error("stage {} channels {} must be a positive multiple of expansion {}", s + 1,
                         stage_channels[s], expansion);
    }
    if (pafb && s > 0 && stage_channels[s] != 2 * stage_channels[s - 1]) {
      throw_config_error("fusion needs channels to double per stage; stage {} has {} after {}", s + 1,
                         stage_channels[s], stage_channels[s - 1]);
    }
  }
}

json ArchConfig::to_json() const {
  return json{{"input_size", input_size}, {"stem_channels", stem_channels},
              {"stage_channels", stage_channels}, {"blocks", blocks},
              {"expansion", expansion}, {"hsca", hsca},
              {"pafb", pafb}, {"reduction", reduction},
              {"head_init_std", head_init_std}};
}

ArchConfig ArchConfig::from_json(const json& j) {
  reject_unknown_keys(j,
                      {"input_size", "stem_channels", "stage_channels", "blocks", "expansion", "hsca", "pafb",
                       "reduction", "head_init_std", "preset"},
                      "architecture");
  ArchConfig c;
  if (j.contains("preset")) {
    const std::string preset = j.at("preset").get<std::string>();
    if (preset == "full") {
      c = full();
    } else if (preset == "tiny") {
      c = tiny();
    } else {
      throw_config_error("unknown architecture preset '{}' (expected full or tiny)", preset);
    }
  }
  read_if(j, "input_size", c.input_size);
  read_if(j, "stem_channels", c.stem_channels);
  read_if(j, "stage_channels", c.stage_channels);
  read_if(j, "blocks", c.blocks);
  read_if(j, "expansion", c.expansion);
  read_if(j, "hsca", c.hsca);
  read_if(j, "pafb", c.pafb);
  read_if(j, "reduction", c.reduction);
  read_if(j, "head_init_std", c.head_init_std);
  c.validate();
  return c;
}

// ------------------------------------------------------------ Bottleneck

Bottleneck::Bottleneck(const std::string& name, int in_channels, int out_channels, int stride, int expansion,
                       bool use_hsca, int reduction)
    : conv1(name + ".conv1", in_channels, out_channels / expansion, 1, 1, 0, false),
      bn1(name + ".bn1", out_channels / expansion),
      conv2(name + ".conv2", out_channels / expansion, out_channels / expansion, 3, stride, 1, false),
      bn2(name + ".bn2", out_channels / expansion),
      conv3(name + ".conv3", out_channels / expansion, out_channels, 1, 1, 0, false),
      bn3(name + ".bn3", out_channels),
      use_hsca_(use_hsca),
      projection_(stride != 1 || in_channels != out_channels) {
  if (use_hsca_) hsca = Hsca(name + ".hsca", out_channels / expansion, reduction);
  if (projection_) {
    shortcut = nn::Conv2d(name + ".shortcut", in_channels, out_channels, 1, stride, 0, false);
    shortcut_bn = nn::BatchNorm2d(name + ".shortcut_bn", out_channels);
  }
}

void Bottleneck::init(std::mt19937_64& rng) {
  conv1.init(rng);
  conv2.init(rng);
  if (use_hsca_) hsca.init(rng);
  conv3.init(rng);
  if (projection_) shortcut.init(rng);
}

Tensor Bottleneck::forward(const Tensor& x, Cache* k) const {
  Tensor a1 = nn::relu(bn1.forward(conv1.forward(x, k ? &k->conv1 : nullptr), k ? &k->bn1 : nullptr));
  Tensor a2 = nn::relu(bn2.forward(conv2.forward(a1, k ? &k->conv2 : nullptr), k ? &k->bn2 : nullptr));
  const Tensor attended = use_hsca_ ? hsca.forward(a2, k ? &k->hsca : nullptr) : a2;
  Tensor out = bn3.forward(conv3.forward(attended, k ? &k->conv3 : nullptr), k ? &k->bn3 : nullptr);
  if (projection_) {
    nn::add_inplace(out, shortcut_bn.forward(shortcut.forward(x, k ? &k->shortcut : nullptr),
                                             k ? &k->shortcut_bn : nullptr));
  } else {
    nn::add_inplace(out, x);
  }
  out = nn::relu(out);
  if (k) {
    k->a1 = std::move(a1);
    k->a2 = std::move(a2);
    k->out = out;
  }
  return out;
}

Tensor Bottleneck::backward(const Cache& k, const Tensor& grad_out) {
  const Tensor g = nn::relu_backward(k.out, grad_out);
  Tensor d = conv3.backward(k.conv3, bn3.backward(k.bn3, g));
  if (use_hsca_) d = hsca.backward(k.hsca, d);
  d = conv2.backward(k.conv2, bn2.backward(k.bn2, nn::relu_backward(k.a2, d)));
  d = conv1.backward(k.conv1, bn1.backward(k.bn1, nn::relu_backward(k.a1, d)));
  if (projection_) {
    nn::add_inplace(d, shortcut.backward(k.shortcut, shortcut_bn.backward(k.shortcut_bn, g)));
  } else {
    nn::add_inplace(d, g);
  }
  return d;
}

void Bottleneck::update_running_statistics(const Cache& k) {
  bn1.update_running_statistics(k.bn1);
  bn2.update_running_statistics(k.bn2);
  bn3.update_running_statistics(k.bn3);
  if (projection_) shortcut_bn.update_running_statistics(k.shortcut_bn);
}

void Bottleneck::collect(nn::ParameterList& params) {
  conv1.collect(params);
  bn1.collect(params);
  conv2.collect(params);
  bn2.collect(params);
  if (use_hsca_) hsca.collect(params);
  conv3.collect(params);
  bn3.collect(params);
  if (projection_) {
    shortcut.collect(params);
    shortcut_bn.collect(params);
  }
}

void Bottleneck::collect_buffers(nn::ParameterList& buffers) {
  bn1.collect_buffers(buffers);
  bn2.collect_buffers(buffers);
  bn3.collect_buffers(buffers);
  if (projection_) shortcut_bn.collect_buffers(buffers);
}

// --------------------------------------------------------------- Network

Network::Network(const ArchConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  stem_ = nn::Conv2d("stem", 3, config_.stem_channels, 7, 2, 3, false);
  stem_bn_ = nn::BatchNorm2d("stem_bn", config_.stem_channels);
  int in = config_.stem_channels;
  for (int s = 0; s < kStages; ++s) {
    std::vector<Bottleneck> blocks;
    for (int b = 0; b < config_.blocks[s]; ++b) {
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      blocks.emplace_back(fmt::format("stage{}.block{}", s + 1, b), in, config_.stage_channels[s], stride,
                          config_.expansion, config_.hsca[s], config_.reduction);
      in = config_.stage_channels[s];
    }
    stages_.push_back(std::move(blocks));
  }
  if (config_.pafb) {
    for (int s = 0; s + 1 < kStages; ++s) {
      fusion_.emplace_back(fmt::format("fusion{}", s + 1), config_.stage_channels[s], config_.reduction);
    }
  }
  fc_ = nn::Linear("head", config_.stage_channels[kStages - 1], kCoefficientCount);

  std::mt19937_64 rng(seed);
  stem_.init(rng);
  for (auto& stage : stages_)
    for (auto& block : stage) block.init(rng);
  for (auto& f : fusion_) f.init(rng);
  fc_.init(rng, config_.head_init_std);
  // Start from neutral white ambient light rather than a black render.
  for (int c = 0; c < 3; ++c) {
    fc_.bias.value[coefficient_layout::kLightingBegin + c * kShBands] = 1.0 / sh_constants::kBand0;
  }
}

Tensor Network::forward(const Tensor& images, NetworkCache* k) const {
  if (images.c() != 3 || images.h() != config_.input_size || images.w() != config_.input_size) {
    throw_data_error("network expects {}x{}x3 input, got {}x{}x{}", config_.input_size, config_.input_size,
                     images.h(), images.w(), images.c());
  }
  Tensor x = nn::relu(
      stem_bn_.forward(stem_.forward(images, k ? &k->stem : nullptr), k ? &k->stem_bn : nullptr));
  if (k) k->stem_out = x;
  x = nn::max_pool(x, k ? &k->pool : nullptr);
  std::array<Tensor, kStages> outputs;
  for (int s = 0; s < kStages; ++s) {
    if (k) k->blocks[s].resize(stages_[s].size());
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      x = stages_[s][b].forward(x, k ? &k->blocks[s][b] : nullptr);
    }
    outputs[s] = x;
  }
  Tensor head_in = outputs[kStages - 1];
  if (config_.pafb) {
    Tensor fused = outputs[0];
    for (int s = 0; s + 1 < kStages; ++s) {
      fused = fusion_[s].forward(fused, outputs[s + 1], k ? &k->fusion[s] : nullptr);
    }
    head_in = std::move(fused);
  }
  if (k) {
    k->head_h = head_in.h();
    k->head_w = head_in.w();
    k->stage_outputs = outputs;
  }
  return fc_.forward(nn::global_avg_pool(head_in), k ? &k->fc : nullptr);
}

void Network::backward(const NetworkCache& k, const Tensor& grad_out) {
  const Tensor d_head = nn::global_avg_pool_backward(fc_.backward(k.fc, grad_out), k.head_h, k.head_w);
  std::array<Tensor, kStages> d_stage;
  for (int s = 0; s < kStages; ++s) {
    const Tensor& o = k.stage_outputs[s];
    d_stage[s] = Tensor(o.n(), o.c(), o.h(), o.w());
  }
  if (config_.pafb) {
    Tensor d_fused = d_head;
    for (int s = kStages - 2; s >= 0; --s) {
      Pafb::Gradients g = fusion_[s].backward(k.fusion[s], d_fused);
      nn::add_inplace(d_stage[s + 1], g.low);
      if (s == 0) {
        nn::add_inplace(d_stage[0], g.high);
      } else {
        d_fused = std::move(g.high);
      }
    }
  } else {
    d_stage[kStages - 1] = d_head;
  }
  Tensor d;
  for (int s = kStages - 1; s >= 0; --s) {
    if (s == kStages - 1) {
      d = d_stage[s];
    } else {
      nn::add_inplace(d, d_stage[s]);
    }
    for (std::size_t b = stages_[s].size(); b-- > 0;) d = stages_[s][b].backward(k.blocks[s][b], d);
  }
  d = nn::max_pool_backward(k.pool, d);
  d = nn::relu_backward(k.stem_out, d);
  stem_.backward(k.stem, stem_bn_.backward(k.stem_bn, d));
}

void Network::update_running_statistics(const NetworkCache& k) {
  stem_bn_.update_running_statistics(k.stem_bn);
  for (int s = 0; s < kStages; ++s)
    for (std::size_t b = 0; b < stages_[s].size(); ++b) stages_[s][b].update_running_statistics(k.blocks[s][b]);
  for (std::size_t f = 0; f < fusion_.size(); ++f) fusion_[f].update_running_statistics(k.fusion[f]);
}

std::array<Tensor, kStages> Network::stage_features(const Tensor& images) const {
  if (images.c() != 3 || images.h() != config_.input_size || images.w() != config_.input_size) {
    throw_data_error("network expects {}x{}x3 input, got {}x{}x{}", config_.input_size, config_.input_size,
                     images.h(), images.w(), images.c());
  }
  Tensor x = nn::max_pool(nn::relu(stem_bn_.forward(stem_.forward(images, nullptr), nullptr)), nullptr);
  std::array<Tensor, kStages> outputs;
  for (int s = 0; s < kStages; ++s) {
    for (const auto& block : stages_[s]) x = block.forward(x, nullptr);
    outputs[s] = x;
  }
  return outputs;
}

CoefficientVector Network::predict(const Image& image) const {
  const Tensor out = forward(image_to_tensor(image), nullptr);
  return split_coefficients(out.data());
}

nn::ParameterList Network::parameters() {
  nn::ParameterList p;
  stem_.collect(p);
  stem_bn_.collect(p);
  for (auto& stage : stages_)
    for (auto& block : stage) block.collect(p);
  for (auto& f : fusion_) f.collect(p);
  fc_.collect(p);
  return p;
}

nn::ParameterList Network::buffers() {
  nn::ParameterList p;
  stem_bn_.collect_buffers(p);
  for (auto& stage : stages_)
    for (auto& block : stage) block.collect_buffers(p);
  for (auto& f : fusion_) f.collect_buffers(p);
  return p;
}

void Network::zero_grad() {
  for (nn::Parameter* p : parameters()) p->zero_grad();
}

void Network::store(ArrayContainer& container) const {
  auto& self = const_cast<Network&>(*this);
  for (const nn::ParameterList& list : {self.parameters(), self.buffers()}) {
    for (const nn::Parameter* p : list) {
      std::vector<std::uint64_t> shape(p->shape.begin(), p->shape.end());
      container.put_real("net/" + p->name, std::move(shape),
                         std::vector<double>(p->value.data(), p->value.data() + p->value.size()));
    }
  }
}

void Network::restore(const ArrayContainer& container) {
  for (const nn::ParameterList& list : {parameters(), buffers()}) {
    for (nn::Parameter* p : list) {
      const auto& a = container.real("net/" + p->name);
      std::vector<std::uint64_t> shape(p->shape.begin(), p->shape.end());
      if (a.shape != shape) throw_data_error("checkpoint array net/{} has the wrong shape", p->name);
      p->value = Eigen::Map<const Eigen::VectorXd>(a.values.data(), static_cast<Eigen::Index>(a.values.size()));
    }
  }
}

// ------------------------------------------------------------- helpers

Tensor image_to_tensor(const Image& image) { return images_to_tensor({&image}); }

Tensor images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw_data_error("empty image batch");
  const int h = images[0]->height(), w = images[0]->width();
  Tensor t(static_cast<int>(images.size()), 3, h, w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& im = *images[n];
    if (im.channels() != 3 || im.height() != h || im.width() != w) {
      throw_data_error("batch images must all be {}x{}x3", h, w);
    }
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) t.at(static_cast<int>(n), c, y, x) = im.at(y, x, c);
  }
  return t;
}

Image resize_bilinear(const Image& map, int height, int width) {
  Image out(height, width, 1);
  const double sy = static_cast<double>(map.height()) / height;
  const double sx = static_cast<double>(map.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, map.height() - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, map.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, map.width() - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, map.width() - 1);
      const double tx = fx - x0;
      out.at(y, x) = (1 - ty) * ((1 - tx) * map.at(y0, x0) + tx * map.at(y0, x1)) +
                     ty * ((1 - tx) * map.at(y1, x0) + tx * map.at(y1, x1));
    }
  }
  return out;
}

std::array<Image, kStages> feature_activation_maps(const Network& network, const Image& image) {
  const auto features = network.stage_features(image_to_tensor(image));
  std::array<Image, kStages> maps;
  for (int s = 0; s < kStages; ++s) {
    const Tensor& f = features[s];
    const Tensor weights = nn::global_avg_pool(f);
    Image cam(f.h(), f.w(), 1);
    for (int c = 0; c < f.c(); ++c) {
      const double wc = weights.at(0, c, 0, 0);
      for (int y = 0; y < f.h(); ++y)
        for (int x = 0; x < f.w(); ++x) cam.at(y, x) += wc * f.at(0, c, y, x);
    }
    Image up = resize_bilinear(cam, image.height(), image.width());
    const auto [lo, hi] = std::minmax_element(up.data().begin(), up.data().end());
    const double min = *lo, range = *hi - *lo;
    for (double& v : up.data()) v = range > 0.0 ? (v - min) / range : 0.0;
    maps[s] = std::move(up);
  }
  return maps;
}

// ------------------------------------------------------------ checkpoint

json camera_to_json(const CameraModel& c) {
  return json{{"focal_length", c.focal_length},
              {"height", c.height},
              {"width", c.width},
              {"principal_point", {c.principal_point.x(), c.principal_point.y()}},
              {"camera_distance", c.camera_distance}};
}

CameraModel camera_from_json(const json& j) {
  reject_unknown_keys(j, {"focal_length", "height", "width", "principal_point", "camera_distance"}, "camera");
  CameraModel c;
  read_if(j, "focal_length", c.focal_length);
  read_if(j, "height", c.height);
  read_if(j, "width", c.width);
  read_if(j, "camera_distance", c.camera_distance);
  if (j.contains("principal_point")) {
    std::array<double, 2> pp{};
    read_if(j, "principal_point", pp);
    c.principal_point = {pp[0], pp[1]};
  } else {
    c.principal_point = {c.width / 2.0, c.height / 2.0};
  }
  c.validate();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Network& network, const MorphableModel& model,
                     const CameraModel& camera, const EmbeddingConfig& embedding, int epoch) {
  ArrayContainer container;
  store_model(model, container);
  network.store(container);
  const json meta{{"format", "mlaface-checkpoint"},
                  {"architecture", network.config().to_json()},
                  {"camera", camera_to_json(camera)},
                  {"embedding", {{"seed", embedding.seed}, {"grid", embedding.grid}, {"dims", embedding.dims}}},
                  {"epoch", epoch}};
  container.set_metadata(meta.dump());
  container.save(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchConfig* expected) {
  const ArrayContainer container = ArrayContainer::load(path);
  json meta;
  try {
    meta = json::parse(container.metadata());
  } catch (const json::exception& e) {
    throw_data_error("{}: checkpoint metadata is not valid JSON: {}", path.string(), e.what());
  }
  if (!meta.is_object() || meta.value("format", "") != "mlaface-checkpoint") {
    throw_data_error("{} is not a checkpoint", path.string());
  }
  Checkpoint ck;
  ck.architecture = ArchConfig::from_json(meta.at("architecture"));
  if (expected && !(ck.architecture == *expected)) {
    throw_config_error("checkpoint architecture {} does not match the configured architecture {}",
                       ck.architecture.to_json().dump(), expected->to_json().dump());
  }
  ck.camera = camera_from_json(meta.at("camera"));
  const json& e = meta.at("embedding");
  ck.embedding.seed = e.at("seed").get<std::uint64_t>();
  ck.embedding.grid = e.at("grid").get<int>();
  ck.embedding.dims = e.at("dims").get<int>();
  ck.epoch = meta.value("epoch", 0);
  ck.network = std::make_unique<Network>(ck.architecture, 0);
  ck.network->restore(container);
  ck.model = std::make_unique<MorphableModel>(restore_model(container));
  return ck;
}

}  // namespace mlaface
