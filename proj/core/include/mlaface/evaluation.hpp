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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "mlaface/backbone.hpp"
#include "mlaface/mesh.hpp"
#include "mlaface/morphable_model.hpp"

namespace mlaface {

// ------------------------------------------------------------ landmarks

struct BoundingBox {
  double height = 0.0;
  double width = 0.0;
};

// Tight axis-aligned box of the given landmarks.
BoundingBox landmark_bbox(const Landmarks2& landmarks);

// Mean Euclidean landmark error over sqrt(h * w), in percent. Throws a data
// error for a non-positive box area.
double nme(const Landmarks2& pred, const Landmarks2& gt, double bbox_height, double bbox_width);
// Normalized by the tight box of gt.
double nme(const Landmarks2& pred, const Landmarks2& gt);

inline constexpr int kYawBuckets = 3;

// 0 for |yaw| in [0, 30), 1 for [30, 60), 2 for [60, 90]; -1 outside or NaN.
int yaw_bucket(double yaw_degrees);

struct YawBuckets {
  std::array<std::vector<int>, kYawBuckets> members;  // sample indices, ascending
  std::array<int, kYawBuckets> available{};           // before balancing
  int excluded = 0;                                   // |yaw| > 90 or NaN
};

// Buckets by |yaw|. With balance, every non-empty bucket is subsampled
// without replacement to the size of the smallest non-empty bucket using
// a generator seeded with seed.
YawBuckets bucket_by_yaw(std::span<const double> yaw_degrees, bool balance, std::uint64_t seed);

struct AlignmentSample {
  std::string id;
  Landmarks2 pred;
  Landmarks2 gt;
  double yaw_degrees = 0.0;
};

struct AlignmentReport {
  std::array<double, kYawBuckets> nme_by_bucket{};  // NaN for an empty bucket
  double mean = 0.0;                                 // over non-empty buckets
  std::array<int, kYawBuckets> counts{};
  std::array<int, kYawBuckets> available{};
  int excluded = 0;
  std::uint64_t seed = 0;
  std::vector<double> per_sample;  // NME of every input sample
  std::vector<int> bucket_of;      // -1 when excluded
  std::vector<bool> selected;      // part of the balanced subset
};

AlignmentReport evaluate_alignment(std::span<const AlignmentSample> samples, std::uint64_t seed,
                                   bool balance = true);

nlohmann::json alignment_report_json(const AlignmentReport& report);
std::string alignment_report_csv(const AlignmentReport& report);
std::string alignment_samples_csv(const AlignmentReport& report, std::span<const AlignmentSample> samples);

// Reads {"image", "landmarks", "yaw", optional "pred_landmarks", optional
// "id"} records. Without pred_landmarks the checkpoint network predicts the
// coefficients and the landmarks are projected through its model and
// camera; a checkpoint is then required.
std::vector<AlignmentSample> load_alignment_samples(const std::filesystem::path& manifest,
                                                    const Checkpoint* checkpoint);

// -------------------------------------------------------------- meshes

struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Vertices apply(const Vertices& points) const;
  // (this after other)(x) = this(other(x))
  Similarity compose(const Similarity& other) const;
};

struct IcpOptions {
  bool allow_scale = true;
  int max_iterations = 100;
  double relative_tolerance = 1e-6;
};

struct IcpResult {
  Similarity transform;              // maps source onto target
  std::vector<double> rmse_history;  // [0] after initialization, then per iteration
  int iterations = 0;
  bool converged = false;
  double rmse() const { return rmse_history.empty() ? 0.0 : rmse_history.back(); }
};

// Point-to-point ICP with a closed-form similarity (or rigid) update per
// iteration. Initialized by matching centroids and, with scaling, RMS radii.
IcpResult icp_align(const Vertices& source, const Vertices& target, const IcpOptions& options = {});

struct CroppedMesh {
  TriangleMesh mesh;
  std::vector<int> kept;  // original index of every kept vertex
};

// Keeps vertices within radius of vertices[centre]; faces with any removed
// vertex are dropped.
CroppedMesh crop_to_radius(const TriangleMesh& mesh, int centre, double radius);

enum class NearestTriangleSearch { kBvh, kExhaustive };

// Distance from every point to the closest point of the surface.
Eigen::VectorXd point_to_surface_distances(const Vertices& points, const TriangleMesh& surface,
                                           NearestTriangleSearch search = NearestTriangleSearch::kBvh);
// RMS of the distances above (pred -> gt direction only).
double point_to_plane_rmse(const Vertices& pred, const TriangleMesh& gt,
                           NearestTriangleSearch search = NearestTriangleSearch::kBvh);

struct ReconstructionOptions {
  double crop_radius = 95.0;
  IcpOptions icp;
};

struct ScanError {
  double rmse = 0.0;
  int icp_iterations = 0;
  int gt_vertices = 0;    // after cropping
  int pred_vertices = 0;  // after alignment and cropping
};

// Crops gt around its nose tip, aligns pred onto it, keeps aligned pred
// vertices within the crop radius of the gt nose tip and measures the
// point-to-plane RMSE.
ScanError reconstruction_error(const TriangleMesh& pred, const TriangleMesh& gt, int gt_nose_tip,
                               const ReconstructionOptions& options = {});

struct ScanPair {
  std::filesystem::path pred;
  std::filesystem::path gt;
  std::string scenario;
  std::string subject;  // defaults to the prediction path
  int nose_tip_index = 0;
};

struct ScenarioRow {
  std::string scenario;
  double mean = 0.0;  // of per-subject means
  double std = 0.0;   // population standard deviation across subjects
  int subjects = 0;
  int frames = 0;
};

struct ReconstructionReport {
  std::vector<ScanPair> pairs;
  std::vector<ScanError> errors;
  std::vector<ScenarioRow> rows;  // sorted by scenario label
};

// Reads {"pred", "gt", "scenario", "nose_tip_index", optional "subject"}.
std::vector<ScanPair> load_scan_pairs(const std::filesystem::path& manifest);
ReconstructionReport evaluate_reconstruction(const std::vector<ScanPair>& pairs,
                                             const ReconstructionOptions& options = {});
// Aggregates frame errors into per-scenario rows.
std::vector<ScenarioRow> aggregate_scenarios(const std::vector<ScanPair>& pairs,
                                             const std::vector<double>& rmse);

nlohmann::json reconstruction_report_json(const ReconstructionReport& report);
std::string reconstruction_report_csv(const ReconstructionReport& report);
std::string reconstruction_frames_csv(const ReconstructionReport& report);

}  // namespace mlaface
