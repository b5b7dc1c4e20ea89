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

#include <vector>

#include <Eigen/Core>

#include "mlaface/mesh.hpp"

namespace mlaface {

// Static 3-d tree over a point set for nearest-neighbour queries.
class KdTree3 {
 public:
  explicit KdTree3(const Vertices& points);

  struct Hit {
    int index = -1;
    double squared_distance = 0.0;
  };
  // Ties resolve to the lowest point index.
  Hit nearest(const Eigen::Vector3d& query) const;

  int size() const { return static_cast<int>(points_.rows()); }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1, right = -1;
  };
  int build(std::vector<int>& order, int begin, int end);
  void search(int node, const Eigen::Vector3d& q, Hit& best) const;

  Vertices points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

struct TrianglePoint {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  double squared_distance = 0.0;
};

// Closest point on triangle (a, b, c) to p, by Voronoi-region classification.
// Degenerate triangles fall back to the closest point on their edges.
TrianglePoint closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                        const Eigen::Vector3d& b, const Eigen::Vector3d& c);

// Bounding-volume hierarchy over mesh triangles for closest-surface-point
// queries.
class TriangleBvh {
 public:
  TriangleBvh(const Vertices& vertices, const Triangles& triangles);

  struct Hit {
    int triangle = -1;
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    double squared_distance = 0.0;
  };
  // Throws a data error on a mesh without triangles.
  Hit closest(const Eigen::Vector3d& query) const;
  // Scans every triangle; reference path for testing the hierarchy.
  Hit closest_exhaustive(const Eigen::Vector3d& query) const;

 private:
  struct Node {
    Eigen::Vector3d lo, hi;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
  };
  int build(int begin, int end);
  void search(int node, const Eigen::Vector3d& q, Hit& best) const;
  Hit test_triangle(int t, const Eigen::Vector3d& q) const;

  Vertices vertices_;
  Triangles triangles_;
  std::vector<int> order_;
  std::vector<Eigen::Vector3d> centroids_;
  std::vector<Node> nodes_;
};

}  // namespace mlaface
