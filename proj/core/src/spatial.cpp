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

#include "mlaface/spatial.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <Eigen/Geometry>

#include "mlaface/error.hpp"

namespace mlaface {

namespace {

constexpr int kLeafSize = 4;

double box_squared_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  double d = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double v = p[k] < lo[k] ? lo[k] - p[k] : (p[k] > hi[k] ? p[k] - hi[k] : 0.0);
    d += v * v;
  }
  return d;
}

Eigen::Vector3d closest_on_segment(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return a;
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + t * ab;
}

}  // namespace

// ---------------------------------------------------------------- KdTree3

KdTree3::KdTree3(const Vertices& points) : points_(points) {
  std::vector<int> order(static_cast<std::size_t>(points_.rows()));
  std::iota(order.begin(), order.end(), 0);
  nodes_.reserve(order.size());
  root_ = build(order, 0, static_cast<int>(order.size()));
}

int KdTree3::build(std::vector<int>& order, int begin, int end) {
  if (begin >= end) return -1;
  // Split on the axis of largest extent.
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (int i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_.row(order[i]).transpose());
    hi = hi.cwiseMax(points_.row(order[i]).transpose());
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end, [&](int a, int b) {
    const double pa = points_(a, axis), pb = points_(b, axis);
    return pa < pb || (pa == pb && a < b);
  });
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({order[mid], axis, -1, -1});
  const int left = build(order, begin, mid);
  const int right = build(order, mid + 1, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

KdTree3::Hit KdTree3::nearest(const Eigen::Vector3d& q) const {
  if (root_ < 0) throw_data_error("nearest-neighbour query on an empty point set");
  Hit best{-1, std::numeric_limits<double>::infinity()};
  search(root_, q, best);
  return best;
}

void KdTree3::search(int id, const Eigen::Vector3d& q, Hit& best) const {
  if (id < 0) return;
  const Node& n = nodes_[id];
  const double d2 = (points_.row(n.point).transpose() - q).squaredNorm();
  if (d2 < best.squared_distance || (d2 == best.squared_distance && n.point < best.index)) {
    best = {n.point, d2};
  }
  const double diff = q[n.axis] - points_(n.point, n.axis);
  const int near = diff < 0 ? n.left : n.right;
  const int far = diff < 0 ? n.right : n.left;
  search(near, q, best);
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

// -------------------------------------------------------- point/triangle

TrianglePoint closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                        const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  const Eigen::Vector3d ab = b - a, ac = c - a, ap = p - a;
  auto result = [&](const Eigen::Vector3d& q) { return TrianglePoint{q, (p - q).squaredNorm()}; };

  if (ab.cross(ac).squaredNorm() == 0.0) {
    const Eigen::Vector3d candidates[3] = {closest_on_segment(p, a, b), closest_on_segment(p, b, c),
                                           closest_on_segment(p, c, a)};
    TrianglePoint best = result(candidates[0]);
    for (int i = 1; i < 3; ++i) {
      const TrianglePoint t = result(candidates[i]);
      if (t.squared_distance < best.squared_distance) best = t;
    }
    return best;
  }

  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return result(a);

  const Eigen::Vector3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return result(b);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return result(a + (d1 / (d1 - d3)) * ab);

  const Eigen::Vector3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return result(c);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return result(a + (d2 / (d2 - d6)) * ac);

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return result(b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b));
  }

  const double denom = 1.0 / (va + vb + vc);
  return result(a + ab * (vb * denom) + ac * (vc * denom));
}

// ------------------------------------------------------------ TriangleBvh

TriangleBvh::TriangleBvh(const Vertices& vertices, const Triangles& triangles)
    : vertices_(vertices), triangles_(triangles) {
  const int n = static_cast<int>(triangles_.rows());
  for (int t = 0; t < n; ++t) {
    for (int k = 0; k < 3; ++k) {
      if (triangles_(t, k) < 0 || triangles_(t, k) >= vertices_.rows()) {
        throw_data_error("triangle {} references vertex {} of {}", t, triangles_(t, k), vertices_.rows());
      }
    }
  }
  order_.resize(static_cast<std::size_t>(n));
  std::iota(order_.begin(), order_.end(), 0);
  centroids_.resize(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    centroids_[t] = (vertices_.row(triangles_(t, 0)) + vertices_.row(triangles_(t, 1)) +
                     vertices_.row(triangles_(t, 2))).transpose() / 3.0;
  }
  if (n > 0) build(0, n);
}

int TriangleBvh::build(int begin, int end) {
  Node node;
  node.lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (int i = begin; i < end; ++i) {
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d v = vertices_.row(triangles_(order_[i], k)).transpose();
      node.lo = node.lo.cwiseMin(v);
      node.hi = node.hi.cwiseMax(v);
    }
  }
  node.begin = begin;
  node.end = end;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return id;

  int axis = 0;
  (node.hi - node.lo).maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double ca = centroids_[a][axis], cb = centroids_[b][axis];
    return ca < cb || (ca == cb && a < b);
  });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

TriangleBvh::Hit TriangleBvh::test_triangle(int t, const Eigen::Vector3d& q) const {
  const TrianglePoint tp =
      closest_point_on_triangle(q, vertices_.row(triangles_(t, 0)).transpose(),
                                vertices_.row(triangles_(t, 1)).transpose(),
                                vertices_.row(triangles_(t, 2)).transpose());
  return {t, tp.point, tp.squared_distance};
}

TriangleBvh::Hit TriangleBvh::closest(const Eigen::Vector3d& q) const {
  if (nodes_.empty()) throw_data_error("closest-point query on a mesh without triangles");
  Hit best;
  best.squared_distance = std::numeric_limits<double>::infinity();
  search(0, q, best);
  return best;
}

void TriangleBvh::search(int id, const Eigen::Vector3d& q, Hit& best) const {
  const Node& n = nodes_[id];
  if (n.left < 0) {
    for (int i = n.begin; i < n.end; ++i) {
      const Hit h = test_triangle(order_[i], q);
      if (h.squared_distance < best.squared_distance ||
          (h.squared_distance == best.squared_distance && h.triangle < best.triangle)) {
        best = h;
      }
    }
    return;
  }
  const double dl = box_squared_distance(q, nodes_[n.left].lo, nodes_[n.left].hi);
  const double dr = box_squared_distance(q, nodes_[n.right].lo, nodes_[n.right].hi);
  const int first = dl <= dr ? n.left : n.right;
  const int second = dl <= dr ? n.right : n.left;
  const double d_first = std::min(dl, dr), d_second = std::max(dl, dr);
  if (d_first <= best.squared_distance) search(first, q, best);
  if (d_second <= best.squared_distance) search(second, q, best);
}

TriangleBvh::Hit TriangleBvh::closest_exhaustive(const Eigen::Vector3d& q) const {
  if (triangles_.rows() == 0) throw_data_error("closest-point query on a mesh without triangles");
  Hit best;
  best.squared_distance = std::numeric_limits<double>::infinity();
  for (int t = 0; t < triangles_.rows(); ++t) {
    const Hit h = test_triangle(t, q);
    if (h.squared_distance < best.squared_distance) best = h;
  }
  return best;
}

}  // namespace mlaface
