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

// Command line entry points: model synthesis, data synthesis, training,
// reconstruction, rendering, evaluation and feature visualization.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mlaface/backbone.hpp"
#include "mlaface/coefficients.hpp"
#include "mlaface/config.hpp"
#include "mlaface/error.hpp"
#include "mlaface/evaluation.hpp"
#include "mlaface/face_render.hpp"
#include "mlaface/image.hpp"
#include "mlaface/io.hpp"
#include "mlaface/mesh.hpp"
#include "mlaface/morphable_model.hpp"
#include "mlaface/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace mlaface {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// Relative output paths are placed under $MLAFACE_OUTPUT_ROOT when set.
fs::path output_path(const fs::path& p) {
  const char* root = std::getenv("MLAFACE_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0' || p.is_absolute()) return p;
  return fs::path(root) / p;
}

fs::path prepare_dir(const fs::path& p) {
  const fs::path dir = output_path(p);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_data_error("cannot create output directory {}: {}", dir.string(), ec.message());
  return dir;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

// Every command records its resolved arguments next to its outputs.
void echo_run(const fs::path& dir, const std::string& command, const json& arguments) {
  write_json(dir / "run.json", {{"command", command}, {"arguments", arguments}});
}

std::string abs_string(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

// ------------------------------------------------------------ commands

struct SynthModelArgs {
  std::uint64_t seed = 0;
  int vertices = 2000;
  std::string out;
};

void cmd_synth_model(const SynthModelArgs& a) {
  const fs::path out = output_path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_model(synthesize_toy_model(a.seed, a.vertices), out);
  const fs::path echo = fs::path(out.string() + ".run.json");
  write_json(echo, {{"command", "synth-model"}, {"arguments", {{"seed", a.seed}, {"vertices", a.vertices}}}});
}

struct SynthDataArgs {
  std::string model;
  std::string camera;
  int count = 16;
  int size = 224;
  std::uint64_t seed = 0;
  double background = 0.0;
  double max_yaw = 60.0;
  std::string out;
};

CameraModel camera_or_default(const std::string& path, int size) {
  if (path.empty()) return CameraModel::centered(size, size, 1015.0 * size / 224.0);
  std::ifstream in(path);
  if (!in) throw_config_error("cannot open camera {}", path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw_config_error("{}: invalid JSON: {}", path, e.what());
  }
  return camera_from_json(j);
}

void cmd_synth_data(const SynthDataArgs& a) {
  const fs::path dir = prepare_dir(a.out);
  const MorphableModel model = load_model(a.model);
  const CameraModel camera = camera_or_default(a.camera, a.size);
  SyntheticDatasetOptions opts;
  opts.count = a.count;
  opts.seed = a.seed;
  opts.background = a.background;
  opts.ranges.max_yaw_degrees = a.max_yaw;
  write_synthetic_dataset(model, camera, opts, dir);
  write_json(dir / "camera.json", camera_to_json(camera));
  echo_run(dir, "synth-data",
           {{"model", abs_string(a.model)}, {"camera", camera_to_json(camera)}, {"count", a.count},
            {"seed", a.seed}, {"background", a.background}, {"max_yaw", a.max_yaw}});
}

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void cmd_train(const TrainArgs& a) {
  RunConfig config = load_run_config(a.config);
  if (a.seed) {
    config.seed = *a.seed;
    config.train.seed = *a.seed;
  }
  const fs::path dir = prepare_dir(a.out);
  const fs::path config_dir = fs::absolute(a.config).parent_path();
  if (!config.model.path.empty() && fs::path(config.model.path).is_relative()) {
    config.model.path = abs_string(config_dir / config.model.path);
  }
  write_json(dir / "config.json", run_config_to_json(config));
  echo_run(dir, "train", {{"config", abs_string(a.config)}, {"data", abs_string(a.data)}, {"seed", config.seed}});
  const MorphableModel model = load_model_source(config.model, config_dir);
  ManifestDataset dataset(a.data);
  const TrainResult r = train(config.train, model, dataset, dir);
  std::cout << fmt::format("steps={} skipped_entries={} skipped_augmentations={} empty_coverage={}\n",
                           r.steps.size(), r.skipped_entries, r.skipped_augmentations, r.empty_coverage);
}

struct ReconstructArgs {
  std::string checkpoint;
  std::string image;
  std::string out;
};

void cmd_reconstruct(const ReconstructArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Image image = read_rgb_png(a.image);
  if (image.height() != ck.camera.height || image.width() != ck.camera.width) {
    throw_data_error("image {} is {}x{}, the checkpoint expects {}x{}", a.image, image.width(), image.height(),
                     ck.camera.width, ck.camera.height);
  }
  const fs::path dir = prepare_dir(a.out);
  const CoefficientVector coeffs = ck.network->predict(image);
  const FaceRenderState state = render_face(*ck.model, coeffs, ck.camera);
  write_coefficients(coeffs, dir / "coeffs.json");
  write_json(dir / "camera.json", camera_to_json(ck.camera));
  write_obj(model_mesh(*ck.model, state.shape, state.texture), dir / "mesh.obj");
  write_png(state.render.image, dir / "render.png");
  write_png(state.render.mask, dir / "mask.png");
  write_landmarks(state.landmarks, dir / "landmarks.txt");
  echo_run(dir, "reconstruct", {{"checkpoint", abs_string(a.checkpoint)}, {"image", abs_string(a.image)}});
}

struct RenderArgs {
  std::string model;
  std::string coeffs;
  std::string camera;
  int size = 224;
  std::string out;
};

void cmd_render(const RenderArgs& a) {
  const MorphableModel model = load_model(a.model);
  const CoefficientVector coeffs = read_coefficients(a.coeffs);
  const CameraModel camera = camera_or_default(a.camera, a.size);
  const fs::path dir = prepare_dir(a.out);
  const FaceRenderState state = render_face(model, coeffs, camera);
  write_png(state.render.image, dir / "render.png");
  write_png(state.render.mask, dir / "mask.png");
  echo_run(dir, "render",
           {{"model", abs_string(a.model)}, {"coeffs", abs_string(a.coeffs)}, {"camera", camera_to_json(camera)}});
}

struct EvalAlignmentArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  std::uint64_t seed = 0;
  bool no_balance = false;
};

void cmd_eval_alignment(const EvalAlignmentArgs& a) {
  std::optional<Checkpoint> ck;
  if (!a.checkpoint.empty()) ck = load_checkpoint(a.checkpoint);
  const auto samples = load_alignment_samples(a.manifest, ck ? &*ck : nullptr);
  const AlignmentReport report = evaluate_alignment(samples, a.seed, !a.no_balance);
  const fs::path dir = prepare_dir(a.out);
  write_json(dir / "alignment.json", alignment_report_json(report));
  write_text(dir / "alignment.csv", alignment_report_csv(report));
  write_text(dir / "alignment_samples.csv", alignment_samples_csv(report, samples));
  echo_run(dir, "eval-alignment",
           {{"checkpoint", a.checkpoint.empty() ? "" : abs_string(a.checkpoint)},
            {"manifest", abs_string(a.manifest)},
            {"seed", a.seed},
            {"balance", !a.no_balance}});
  std::cout << alignment_report_csv(report);
}

struct EvalReconArgs {
  std::string manifest;
  std::string out;
  double crop_radius = 95.0;
};

void cmd_eval_recon(const EvalReconArgs& a) {
  ReconstructionOptions opts;
  opts.crop_radius = a.crop_radius;
  if (!(opts.crop_radius > 0.0)) throw_config_error("--crop-radius must be positive");
  const auto pairs = load_scan_pairs(a.manifest);
  const ReconstructionReport report = evaluate_reconstruction(pairs, opts);
  const fs::path dir = prepare_dir(a.out);
  write_json(dir / "reconstruction.json", reconstruction_report_json(report));
  write_text(dir / "reconstruction.csv", reconstruction_report_csv(report));
  write_text(dir / "reconstruction_frames.csv", reconstruction_frames_csv(report));
  echo_run(dir, "eval-recon", {{"manifest", abs_string(a.manifest)}, {"crop_radius", a.crop_radius}});
  std::cout << reconstruction_report_csv(report);
}

struct VisualizeArgs {
  std::string checkpoint;
  std::string image;
  int stage = 0;  // 0: all stages
  std::string out;
};

void cmd_visualize(const VisualizeArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Image image = read_rgb_png(a.image);
  const int s = ck.architecture.input_size;
  if (image.height() != s || image.width() != s) {
    throw_data_error("image {} is {}x{}, the network expects {}x{}", a.image, image.width(), image.height(), s, s);
  }
  const fs::path dir = prepare_dir(a.out);
  const auto maps = feature_activation_maps(*ck.network, image);
  for (int k = 0; k < kStages; ++k) {
    if (a.stage != 0 && a.stage != k + 1) continue;
    write_png(apply_jet_colormap(maps[static_cast<std::size_t>(k)]), dir / fmt::format("cam_stage{}.png", k + 1));
  }
  echo_run(dir, "visualize",
           {{"checkpoint", abs_string(a.checkpoint)}, {"image", abs_string(a.image)}, {"stage", a.stage}});
}

std::string single_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

int fail(int code, const char* kind, const std::string& message) {
  std::cerr << "error: " << kind << ": " << single_line(message) << '\n';
  return code;
}

int run(int argc, char** argv) {
  CLI::App app{"3D face reconstruction toolkit"};
  app.require_subcommand(1);

  SynthModelArgs sm;
  auto* c_sm = app.add_subcommand("synth-model", "Write a seeded toy morphable model");
  c_sm->add_option("--seed", sm.seed);
  c_sm->add_option("--vertices", sm.vertices);
  c_sm->add_option("--out", sm.out)->required();

  SynthDataArgs sd;
  auto* c_sd = app.add_subcommand("synth-data", "Render a seeded synthetic training set");
  c_sd->add_option("--model", sd.model)->required();
  c_sd->add_option("--camera", sd.camera);
  c_sd->add_option("--count", sd.count);
  c_sd->add_option("--size", sd.size, "Image size when no camera is given");
  c_sd->add_option("--seed", sd.seed);
  c_sd->add_option("--background", sd.background);
  c_sd->add_option("--max-yaw", sd.max_yaw);
  c_sd->add_option("--out", sd.out)->required();

  TrainArgs tr;
  std::uint64_t train_seed = 0;
  auto* c_tr = app.add_subcommand("train", "Train the regressor");
  c_tr->add_option("--config", tr.config)->required();
  c_tr->add_option("--data", tr.data)->required();
  c_tr->add_option("--out", tr.out)->required();
  auto* seed_opt = c_tr->add_option("--seed", train_seed, "Overrides the config seed");

  ReconstructArgs rc;
  auto* c_rc = app.add_subcommand("reconstruct", "Regress coefficients for one image");
  c_rc->add_option("--checkpoint", rc.checkpoint)->required();
  c_rc->add_option("--image", rc.image)->required();
  c_rc->add_option("--out", rc.out)->required();

  RenderArgs rd;
  auto* c_rd = app.add_subcommand("render", "Render coefficients without the network");
  c_rd->add_option("--model", rd.model)->required();
  c_rd->add_option("--coeffs", rd.coeffs)->required();
  c_rd->add_option("--camera", rd.camera);
  c_rd->add_option("--size", rd.size, "Image size when no camera is given");
  c_rd->add_option("--out", rd.out)->required();

  EvalAlignmentArgs ea;
  auto* c_ea = app.add_subcommand("eval-alignment", "Landmark NME per yaw bucket");
  c_ea->add_option("--checkpoint", ea.checkpoint);
  c_ea->add_option("--manifest", ea.manifest)->required();
  c_ea->add_option("--out", ea.out)->required();
  c_ea->add_option("--seed", ea.seed);
  c_ea->add_flag("--no-balance", ea.no_balance);

  EvalReconArgs er;
  auto* c_er = app.add_subcommand("eval-recon", "Point-to-plane RMSE per scenario");
  c_er->add_option("--manifest", er.manifest)->required();
  c_er->add_option("--out", er.out)->required();
  c_er->add_option("--crop-radius", er.crop_radius);

  VisualizeArgs vz;
  auto* c_vz = app.add_subcommand("visualize", "Class activation heatmaps per stage");
  c_vz->add_option("--checkpoint", vz.checkpoint)->required();
  c_vz->add_option("--image", vz.image)->required();
  c_vz->add_option("--stage", vz.stage, "1-4, or 0 for all")->check(CLI::Range(0, kStages));
  c_vz->add_option("--out", vz.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitConfig, "config", e.what());
  }

  try {
    if (c_sm->parsed()) cmd_synth_model(sm);
    if (c_sd->parsed()) cmd_synth_data(sd);
    if (c_tr->parsed()) {
      if (seed_opt->count() > 0) tr.seed = train_seed;
      cmd_train(tr);
    }
    if (c_rc->parsed()) cmd_reconstruct(rc);
    if (c_rd->parsed()) cmd_render(rd);
    if (c_ea->parsed()) cmd_eval_alignment(ea);
    if (c_er->parsed()) cmd_eval_recon(er);
    if (c_vz->parsed()) cmd_visualize(vz);
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::kConfig: return fail(kExitConfig, "config", e.what());
      case ErrorKind::kData: return fail(kExitData, "data", e.what());
      case ErrorKind::kNumeric: return fail(kExitNumeric, "numeric", e.what());
    }
  } catch (const fs::filesystem_error& e) {
    return fail(kExitData, "data", e.what());
  } catch (const json::exception& e) {
    return fail(kExitData, "data", e.what());
  } catch (const std::exception& e) {
    return fail(kExitNumeric, "numeric", e.what());
  }
  return kExitOk;
}

}  // namespace
}  // namespace mlaface

int main(int argc, char** argv) { return mlaface::run(argc, argv); }
