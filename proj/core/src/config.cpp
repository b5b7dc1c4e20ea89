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

#include "mlaface/config.hpp"

#include <fstream>
#include <sstream>

#include "mlaface/error.hpp"
#include "mlaface/json_util.hpp"

namespace mlaface {

using json = nlohmann::json;

namespace {

void parse_train(const json& j, TrainConfig& t) {
  reject_unknown_keys(j,
                      {"epochs", "batch_size", "learning_rate", "lr_decay", "lr_decay_every", "max_steps",
                       "augment", "shift_probability", "max_shift", "max_rotation_degrees"},
                      "train");
  read_if(j, "epochs", t.epochs);
  read_if(j, "batch_size", t.batch_size);
  read_if(j, "learning_rate", t.learning_rate);
  read_if(j, "lr_decay", t.lr_decay);
  read_if(j, "lr_decay_every", t.lr_decay_every);
  read_if(j, "max_steps", t.max_steps);
  read_if(j, "augment", t.augment.enabled);
  read_if(j, "shift_probability", t.augment.shift_probability);
  read_if(j, "max_shift", t.augment.max_shift);
  read_if(j, "max_rotation_degrees", t.augment.max_rotation_degrees);
}

void parse_loss(const json& j, LossWeights& w) {
  reject_unknown_keys(j,
                      {"photometric", "perceptual", "landmark", "coefficient", "reflectance", "identity",
                       "expression", "texture", "inner_mouth", "inner_mouth_indices"},
                      "loss");
  read_if(j, "photometric", w.photometric);
  read_if(j, "perceptual", w.perceptual);
  read_if(j, "landmark", w.landmark);
  read_if(j, "coefficient", w.coefficient);
  read_if(j, "reflectance", w.reflectance);
  read_if(j, "identity", w.identity);
  read_if(j, "expression", w.expression);
  read_if(j, "texture", w.texture);
  read_if(j, "inner_mouth", w.inner_mouth);
  read_if(j, "inner_mouth_indices", w.inner_mouth_indices);
}

void parse_model(const json& j, ModelSource& m) {
  reject_unknown_keys(j, {"path", "synthetic"}, "model");
  if (j.contains("path") == j.contains("synthetic")) {
    throw_config_error("model section needs exactly one of 'path' or 'synthetic'");
  }
  read_if(j, "path", m.path);
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    reject_unknown_keys(s, {"seed", "vertices"}, "model.synthetic");
    read_if(s, "seed", m.synthetic_seed);
    read_if(s, "vertices", m.synthetic_vertices);
    if (m.synthetic_vertices < 12) throw_config_error("model.synthetic.vertices must be >= 12");
  }
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  reject_unknown_keys(j, {"version", "seed", "model", "train", "architecture", "loss", "camera", "embedding"},
                      "config");
  int version = kConfigVersion;
  read_if(j, "version", version);
  if (version != kConfigVersion) throw_config_error("unsupported config version {} (expected {})", version, kConfigVersion);
  RunConfig c;
  read_if(j, "seed", c.seed);
  c.train.seed = c.seed;
  if (j.contains("model")) parse_model(j.at("model"), c.model);
  if (j.contains("train")) parse_train(j.at("train"), c.train);
  if (j.contains("architecture")) c.train.architecture = ArchConfig::from_json(j.at("architecture"));
  if (j.contains("loss")) parse_loss(j.at("loss"), c.train.loss);
  const int s = c.train.architecture.input_size;
  if (j.contains("camera")) {
    c.train.camera = camera_from_json(j.at("camera"));
  } else {
    c.train.camera = CameraModel::centered(s, s, 1015.0 * s / 224.0);
  }
  if (j.contains("embedding")) {
    const json& e = j.at("embedding");
    reject_unknown_keys(e, {"seed", "grid", "dims"}, "embedding");
    read_if(e, "seed", c.train.embedding.seed);
    read_if(e, "grid", c.train.embedding.grid);
    read_if(e, "dims", c.train.embedding.dims);
  }
  c.train.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_config_error("cannot open config {}", path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw_config_error("{}: invalid JSON: {}", path.string(), e.what());
  }
  return parse_run_config(j);
}

json run_config_to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  json model;
  if (!c.model.path.empty()) {
    model = {{"path", c.model.path}};
  } else {
    model = {{"synthetic", {{"seed", c.model.synthetic_seed}, {"vertices", c.model.synthetic_vertices}}}};
  }
  const LossWeights& w = t.loss;
  return {
      {"version", kConfigVersion},
      {"seed", c.seed},
      {"model", model},
      {"train",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate},
        {"lr_decay", t.lr_decay},
        {"lr_decay_every", t.lr_decay_every},
        {"max_steps", t.max_steps},
        {"augment", t.augment.enabled},
        {"shift_probability", t.augment.shift_probability},
        {"max_shift", t.augment.max_shift},
        {"max_rotation_degrees", t.augment.max_rotation_degrees}}},
      {"architecture", t.architecture.to_json()},
      {"loss",
       {{"photometric", w.photometric},
        {"perceptual", w.perceptual},
        {"landmark", w.landmark},
        {"coefficient", w.coefficient},
        {"reflectance", w.reflectance},
        {"identity", w.identity},
        {"expression", w.expression},
        {"texture", w.texture},
        {"inner_mouth", w.inner_mouth},
        {"inner_mouth_indices", w.inner_mouth_indices}}},
      {"camera", camera_to_json(t.camera)},
      {"embedding", {{"seed", t.embedding.seed}, {"grid", t.embedding.grid}, {"dims", t.embedding.dims}}},
  };
}

MorphableModel load_model_source(const ModelSource& source, const std::filesystem::path& base_dir) {
  if (source.path.empty()) return synthesize_toy_model(source.synthetic_seed, source.synthetic_vertices);
  std::filesystem::path p(source.path);
  if (p.is_relative()) p = base_dir / p;
  return load_model(p);
}

}  // namespace mlaface
