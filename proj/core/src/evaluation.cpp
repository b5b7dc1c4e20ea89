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

#include "mlaface/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/Geometry>
#include <fmt/format.h>

#include "mlaface/camera.hpp"
#include "mlaface/error.hpp"
#include "mlaface/io.hpp"
#include "mlaface/spatial.hpp"

namespace mlaface {

using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_number(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : std::string("nan"); }

const char* const kBucketLabels[kYawBuckets] = {"[0,30)", "[30,60)", "[60,90]"};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double rms(const Vertices& points, const Eigen::RowVector3d& centre) {
  return std::sqrt((points.rowwise() - centre).rowwise().squaredNorm().mean());
}

}  // namespace

// ------------------------------------------------------------ landmarks

BoundingBox landmark_bbox(const Landmarks2& lm) {
  const Eigen::RowVector2d lo = lm.colwise().minCoeff();
  const Eigen::RowVector2d hi = lm.colwise().maxCoeff();
  return {hi.y() - lo.y(), hi.x() - lo.x()};
}

double nme(const Landmarks2& pred, const Landmarks2& gt, double bbox_height, double bbox_width) {
  if (!(bbox_height > 0.0 && bbox_width > 0.0)) {
    throw_data_error("NME needs a positive bounding box, got {}x{}", bbox_height, bbox_width);
  }
  const double mean_error = (pred - gt).rowwise().norm().mean();
  return 100.0 * mean_error / std::sqrt(bbox_height * bbox_width);
}

double nme(const Landmarks2& pred, const Landmarks2& gt) {
  const BoundingBox box = landmark_bbox(gt);
  return nme(pred, gt, box.height, box.width);
}

int yaw_bucket(double yaw_degrees) {
  const double a = std::abs(yaw_degrees);
  if (!(a <= 90.0)) return -1;
  if (a < 30.0) return 0;
  if (a < 60.0) return 1;
  return 2;
}

YawBuckets bucket_by_yaw(std::span<const double> yaw_degrees, bool balance, std::uint64_t seed) {
  YawBuckets b;
  for (std::size_t i = 0; i < yaw_degrees.size(); ++i) {
    const int k = yaw_bucket(yaw_degrees[i]);
    if (k < 0) {
      ++b.excluded;
    } else {
      b.members[k].push_back(static_cast<int>(i));
    }
  }
  for (int k = 0; k < kYawBuckets; ++k) b.available[k] = static_cast<int>(b.members[k].size());
  if (!balance) return b;
  int smallest = std::numeric_limits<int>::max();
  for (const auto& m : b.members)
    if (!m.empty()) smallest = std::min(smallest, static_cast<int>(m.size()));
  std::mt19937_64 rng(seed);
  for (auto& m : b.members) {
    if (m.empty()) continue;
    std::shuffle(m.begin(), m.end(), rng);
    m.resize(static_cast<std::size_t>(smallest));
    std::sort(m.begin(), m.end());
  }
  return b;
}

AlignmentReport evaluate_alignment(std::span<const AlignmentSample> samples, std::uint64_t seed, bool balance) {
  AlignmentReport r;
  r.seed = seed;
  std::vector<double> yaws;
  for (const auto& s : samples) {
    yaws.push_back(s.yaw_degrees);
    r.per_sample.push_back(nme(s.pred, s.gt));
    r.bucket_of.push_back(yaw_bucket(s.yaw_degrees));
  }
  const YawBuckets buckets = bucket_by_yaw(yaws, balance, seed);
  r.selected.assign(samples.size(), false);
  r.available = buckets.available;
  r.excluded = buckets.excluded;
  double sum = 0.0;
  int non_empty = 0;
  for (int k = 0; k < kYawBuckets; ++k) {
    const auto& m = buckets.members[k];
    r.counts[k] = static_cast<int>(m.size());
    if (m.empty()) {
      r.nme_by_bucket[k] = kNaN;
      continue;
    }
    double acc = 0.0;
    for (int i : m) {
      acc += r.per_sample[i];
      r.selected[i] = true;
    }
    r.nme_by_bucket[k] = acc / m.size();
    sum += r.nme_by_bucket[k];
    ++non_empty;
  }
  r.mean = non_empty ? sum / non_empty : kNaN;
  return r;
}

json alignment_report_json(const AlignmentReport& r) {
  json buckets = json::array();
  for (int k = 0; k < kYawBuckets; ++k) {
    buckets.push_back({{"yaw", kBucketLabels[k]},
                       {"nme_percent", number_or_null(r.nme_by_bucket[k])},
                       {"count", r.counts[k]},
                       {"available", r.available[k]}});
  }
  return {{"buckets", buckets}, {"mean_nme_percent", number_or_null(r.mean)},
          {"excluded", r.excluded}, {"seed", r.seed}};
}

std::string alignment_report_csv(const AlignmentReport& r) {
  std::string out = "yaw_0_30,yaw_30_60,yaw_60_90,mean\n";
  out += fmt::format("{},{},{},{}\n", csv_number(r.nme_by_bucket[0]), csv_number(r.nme_by_bucket[1]),
                     csv_number(r.nme_by_bucket[2]), csv_number(r.mean));
  return out;
}

std::string alignment_samples_csv(const AlignmentReport& r, std::span<const AlignmentSample> samples) {
  std::string out = "id,yaw,bucket,selected,nme\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out += fmt::format("{},{},{},{},{}\n", csv_field(samples[i].id), csv_number(samples[i].yaw_degrees),
                       r.bucket_of[i], r.selected[i] ? 1 : 0, csv_number(r.per_sample[i]));
  }
  return out;
}

std::vector<AlignmentSample> load_alignment_samples(const std::filesystem::path& manifest,
                                                    const Checkpoint* checkpoint) {
  std::vector<AlignmentSample> samples;
  int line = 0;
  for (const json& rec : read_jsonl(manifest)) {
    ++line;
    AlignmentSample s;
    try {
      s.id = rec.value("id", rec.value("image", fmt::format("sample{}", line)));
      s.gt = read_landmarks(resolve_path(manifest, rec.at("landmarks").get<std::string>()));
      s.yaw_degrees = rec.at("yaw").get<double>();
      if (rec.contains("pred_landmarks")) {
        s.pred = read_landmarks(resolve_path(manifest, rec.at("pred_landmarks").get<std::string>()));
      } else {
        if (!checkpoint) throw_config_error("record {} has no pred_landmarks and no checkpoint was given", line);
        const Image image = read_rgb_png(resolve_path(manifest, rec.at("image").get<std::string>()));
        const CoefficientVector coeffs = checkpoint->network->predict(image);
        s.pred = project_landmarks(*checkpoint->model, coeffs, checkpoint->camera);
      }
    } catch (const json::exception& e) {
      throw_data_error("{}: record {}: {}", manifest.string(), line, e.what());
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

// -------------------------------------------------------------- meshes

Vertices Similarity::apply(const Vertices& points) const {
  Vertices out = (scale * (points * rotation.transpose())).eval();
  out.rowwise() += translation.transpose();
  return out;
}

Similarity Similarity::compose(const Similarity& other) const {
  Similarity s;
  s.scale = scale * other.scale;
  s.rotation = rotation * other.rotation;
  s.translation = scale * (rotation * other.translation) + translation;
  return s;
}

IcpResult icp_align(const Vertices& source, const Vertices& target, const IcpOptions& options) {
  if (source.rows() == 0 || target.rows() == 0) throw_data_error("ICP needs non-empty point sets");
  if (options.max_iterations < 0 || !(options.relative_tolerance >= 0.0)) {
    throw_config_error("invalid ICP options");
  }
  const KdTree3 tree(target);
  const Eigen::RowVector3d cs = source.colwise().mean();
  const Eigen::RowVector3d ct = target.colwise().mean();

  IcpResult r;
  if (options.allow_scale) {
    const double rs = rms(source, cs), rt = rms(target, ct);
    if (rs > 0.0 && rt > 0.0) r.transform.scale = rt / rs;
  }
  r.transform.translation = (ct - r.transform.scale * cs).transpose();

  Vertices current = r.transform.apply(source);
  Vertices matched(source.rows(), 3);
  auto correspond = [&]() {
    double sq = 0.0;
    for (Eigen::Index i = 0; i < current.rows(); ++i) {
      const KdTree3::Hit h = tree.nearest(current.row(i).transpose());
      matched.row(i) = target.row(h.index);
      sq += h.squared_distance;
    }
    return std::sqrt(sq / static_cast<double>(current.rows()));
  };
  r.rmse_history.push_back(correspond());

  while (r.iterations < options.max_iterations) {
    const double previous = r.rmse_history.back();
    if (previous == 0.0) {
      r.converged = true;
      break;
    }
    const Eigen::Matrix4d h =
        Eigen::umeyama(current.transpose(), matched.transpose(), options.allow_scale && source.rows() > 1);
    Similarity step;
    const Eigen::Matrix3d sr = h.topLeftCorner<3, 3>();
    if (options.allow_scale) {
      step.scale = std::cbrt(sr.determinant());
      step.rotation = sr / step.scale;
    } else {
      step.rotation = sr;
    }
    step.translation = h.topRightCorner<3, 1>();
    r.transform = step.compose(r.transform);
    current = r.transform.apply(source);
    const double now = correspond();
    r.rmse_history.push_back(now);
    ++r.iterations;
    if ((previous - now) / previous < options.relative_tolerance) {
      r.converged = true;
      break;
    }
  }
  return r;
}

CroppedMesh crop_to_radius(const TriangleMesh& mesh, int centre, double radius) {
  if (centre < 0 || centre >= mesh.vertices.rows()) {
    throw_data_error("crop centre {} outside mesh with {} vertices", centre, mesh.vertices.rows());
  }
  if (!(radius >= 0.0)) throw_config_error("crop radius must be >= 0");
  const Eigen::RowVector3d c = mesh.vertices.row(centre);
  std::vector<int> remap(static_cast<std::size_t>(mesh.vertices.rows()), -1);
  CroppedMesh out;
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    if ((mesh.vertices.row(i) - c).norm() <= radius) {
      remap[static_cast<std::size_t>(i)] = static_cast<int>(out.kept.size());
      out.kept.push_back(static_cast<int>(i));
    }
  }
  const auto kept = static_cast<Eigen::Index>(out.kept.size());
  out.mesh.vertices.resize(kept, 3);
  const bool has_colors = mesh.colors.rows() == mesh.vertices.rows() && mesh.colors.rows() > 0;
  if (has_colors) out.mesh.colors.resize(kept, 3);
  for (Eigen::Index i = 0; i < kept; ++i) {
    out.mesh.vertices.row(i) = mesh.vertices.row(out.kept[static_cast<std::size_t>(i)]);
    if (has_colors) out.mesh.colors.row(i) = mesh.colors.row(out.kept[static_cast<std::size_t>(i)]);
  }
  std::vector<Eigen::Vector3i> faces;
  for (Eigen::Index f = 0; f < mesh.triangles.rows(); ++f) {
    const int a = remap[mesh.triangles(f, 0)], b = remap[mesh.triangles(f, 1)], d = remap[mesh.triangles(f, 2)];
    if (a >= 0 && b >= 0 && d >= 0) faces.emplace_back(a, b, d);
  }
  out.mesh.triangles.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) out.mesh.triangles.row(static_cast<Eigen::Index>(f)) = faces[f];
  return out;
}

Eigen::VectorXd point_to_surface_distances(const Vertices& points, const TriangleMesh& surface,
                                           NearestTriangleSearch search) {
  const TriangleBvh bvh(surface.vertices, surface.triangles);
  Eigen::VectorXd d(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::Vector3d p = points.row(i).transpose();
    const TriangleBvh::Hit h = search == NearestTriangleSearch::kBvh ? bvh.closest(p) : bvh.closest_exhaustive(p);
    d[i] = std::sqrt(h.squared_distance);
  }
  return d;
}

double point_to_plane_rmse(const Vertices& pred, const TriangleMesh& gt, NearestTriangleSearch search) {
  if (pred.rows() == 0) throw_data_error("point-to-plane RMSE of an empty point set");
  const Eigen::VectorXd d = point_to_surface_distances(pred, gt, search);
  return std::sqrt(d.squaredNorm() / static_cast<double>(d.size()));
}

ScanError reconstruction_error(const TriangleMesh& pred, const TriangleMesh& gt, int gt_nose_tip,
                               const ReconstructionOptions& options) {
  const CroppedMesh crop = crop_to_radius(gt, gt_nose_tip, options.crop_radius);
  if (crop.mesh.triangles.rows() == 0) throw_data_error("ground-truth crop contains no triangles");
  const IcpResult icp = icp_align(pred.vertices, crop.mesh.vertices, options.icp);
  const Vertices aligned = icp.transform.apply(pred.vertices);
  const Eigen::RowVector3d nose = gt.vertices.row(gt_nose_tip);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < aligned.rows(); ++i) {
    if ((aligned.row(i) - nose).norm() <= options.crop_radius) keep.push_back(i);
  }
  if (keep.empty()) throw_data_error("no aligned prediction vertex lies within the crop radius");
  Vertices kept(static_cast<Eigen::Index>(keep.size()), 3);
  for (std::size_t i = 0; i < keep.size(); ++i) kept.row(static_cast<Eigen::Index>(i)) = aligned.row(keep[i]);
  ScanError e;
  e.rmse = point_to_plane_rmse(kept, crop.mesh);
  e.icp_iterations = icp.iterations;
  e.gt_vertices = static_cast<int>(crop.kept.size());
  e.pred_vertices = static_cast<int>(keep.size());
  return e;
}

std::vector<ScanPair> load_scan_pairs(const std::filesystem::path& manifest) {
  std::vector<ScanPair> pairs;
  int line = 0;
  for (const json& rec : read_jsonl(manifest)) {
    ++line;
    ScanPair p;
    try {
      p.pred = resolve_path(manifest, rec.at("pred").get<std::string>());
      p.gt = resolve_path(manifest, rec.at("gt").get<std::string>());
      p.scenario = rec.at("scenario").get<std::string>();
      p.nose_tip_index = rec.at("nose_tip_index").get<int>();
      p.subject = rec.value("subject", p.pred.string());
    } catch (const json::exception& e) {
      throw_data_error("{}: record {}: {}", manifest.string(), line, e.what());
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<ScenarioRow> aggregate_scenarios(const std::vector<ScanPair>& pairs, const std::vector<double>& rmse) {
  check_size("scan errors", static_cast<long long>(rmse.size()), static_cast<long long>(pairs.size()));
  // scenario -> subject -> frame errors
  std::map<std::string, std::map<std::string, std::vector<double>>> grouped;
  for (std::size_t i = 0; i < pairs.size(); ++i) grouped[pairs[i].scenario][pairs[i].subject].push_back(rmse[i]);
  std::vector<ScenarioRow> rows;
  for (const auto& [scenario, subjects] : grouped) {
    ScenarioRow row;
    row.scenario = scenario;
    std::vector<double> means;
    for (const auto& [subject, frames] : subjects) {
      means.push_back(std::accumulate(frames.begin(), frames.end(), 0.0) / frames.size());
      row.frames += static_cast<int>(frames.size());
    }
    row.subjects = static_cast<int>(means.size());
    row.mean = std::accumulate(means.begin(), means.end(), 0.0) / means.size();
    double var = 0.0;
    for (double m : means) var += (m - row.mean) * (m - row.mean);
    row.std = std::sqrt(var / means.size());
    rows.push_back(row);
  }
  return rows;
}

ReconstructionReport evaluate_reconstruction(const std::vector<ScanPair>& pairs,
                                             const ReconstructionOptions& options) {
  ReconstructionReport r;
  r.pairs = pairs;
  std::vector<double> rmse;
  for (const ScanPair& p : pairs) {
    const TriangleMesh pred = read_obj(p.pred);
    const TriangleMesh gt = read_obj(p.gt);
    r.errors.push_back(reconstruction_error(pred, gt, p.nose_tip_index, options));
    rmse.push_back(r.errors.back().rmse);
  }
  r.rows = aggregate_scenarios(pairs, rmse);
  return r;
}

json reconstruction_report_json(const ReconstructionReport& r) {
  json rows = json::array();
  for (const ScenarioRow& row : r.rows) {
    rows.push_back({{"scenario", row.scenario},
                    {"rmse_mean_mm", row.mean},
                    {"rmse_std_mm", row.std},
                    {"subjects", row.subjects},
                    {"frames", row.frames}});
  }
  return {{"scenarios", rows}, {"frames", static_cast<int>(r.pairs.size())}};
}

std::string reconstruction_report_csv(const ReconstructionReport& r) {
  std::string out = "scenario,rmse_mean_mm,rmse_std_mm,subjects,frames\n";
  for (const ScenarioRow& row : r.rows) {
    out += fmt::format("{},{},{},{},{}\n", csv_field(row.scenario), csv_number(row.mean), csv_number(row.std),
                       row.subjects, row.frames);
  }
  return out;
}

std::string reconstruction_frames_csv(const ReconstructionReport& r) {
  std::string out = "scenario,subject,pred,gt,rmse_mm,icp_iterations,pred_vertices,gt_vertices\n";
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    const ScanPair& p = r.pairs[i];
    const ScanError& e = r.errors[i];
    out += fmt::format("{},{},{},{},{},{},{},{}\n", csv_field(p.scenario), csv_field(p.subject),
                       csv_field(p.pred.string()), csv_field(p.gt.string()), csv_number(e.rmse), e.icp_iterations,
                       e.pred_vertices, e.gt_vertices);
  }
  return out;
}

}  // namespace mlaface
