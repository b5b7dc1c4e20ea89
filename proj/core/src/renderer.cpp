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

#include "mlaface/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>

#include "mlaface/error.hpp"

namespace mlaface {

namespace {

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

// Top-left rule for a directed edge of a positively oriented triangle
// (pixel coordinates, y down).
bool is_top_left(const Eigen::Vector2d& d) { return d.y() < 0.0 || (d.y() == 0.0 && d.x() > 0.0); }

}  // namespace

FragmentBuffers rasterize(const Points2& points, const Eigen::VectorXd& depth,
                          const Triangles& triangles, int height, int width,
                          const RasterOptions& options) {
  if (height <= 0 || width <= 0) throw_config_error("raster size must be positive, got {}x{}", height, width);
  check_size("depth entries", depth.size(), points.rows());
  FragmentBuffers fb;
  fb.height = height;
  fb.width = width;
  const std::size_t n_pixels = static_cast<std::size_t>(height) * width;
  fb.triangle.assign(n_pixels, kNoTriangle);
  fb.barycentric.assign(n_pixels * 3, 0.0);
  fb.depth.assign(n_pixels, std::numeric_limits<double>::infinity());

  for (Eigen::Index f = 0; f < triangles.rows(); ++f) {
    std::array<Eigen::Vector2d, 3> p;
    std::array<double, 3> z;
    bool valid = true;
    for (int k = 0; k < 3; ++k) {
      const int v = triangles(f, k);
      if (v < 0 || v >= points.rows()) throw_data_error("triangle {} references vertex {} of {}", f, v, points.rows());
      p[k] = points.row(v).transpose();
      z[k] = depth[v];
      valid = valid && p[k].allFinite() && z[k] > 0.0;
    }
    if (!valid) continue;
    const double area = cross2(p[1] - p[0], p[2] - p[0]);
    if (area == 0.0) continue;
    if (options.cull == CullMode::kBack && area > 0.0) continue;
    const double sign = area > 0.0 ? 1.0 : -1.0;

    std::array<bool, 3> top_left;
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector2d& a = p[(i + 1) % 3];
      const Eigen::Vector2d& b = p[(i + 2) % 3];
      top_left[i] = is_top_left(sign > 0 ? Eigen::Vector2d(b - a) : Eigen::Vector2d(a - b));
    }

    const double min_x = std::min({p[0].x(), p[1].x(), p[2].x()});
    const double max_x = std::max({p[0].x(), p[1].x(), p[2].x()});
    const double min_y = std::min({p[0].y(), p[1].y(), p[2].y()});
    const double max_y = std::max({p[0].y(), p[1].y(), p[2].y()});
    const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(max_x - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(max_y - 0.5)));

    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Eigen::Vector2d q(x + 0.5, y + 0.5);
        std::array<double, 3> w;
        bool inside = true;
        for (int i = 0; i < 3 && inside; ++i) {
          w[i] = cross2(p[(i + 1) % 3] - q, p[(i + 2) % 3] - q);
          const double ws = sign * w[i];
          inside = ws > 0.0 || (ws == 0.0 && top_left[i]);
        }
        if (!inside) continue;
        const double b0 = w[0] / area, b1 = w[1] / area, b2 = w[2] / area;
        const double d = 1.0 / (b0 / z[0] + b1 / z[1] + b2 / z[2]);
        const std::size_t px = fb.pixel(y, x);
        if (d < fb.depth[px]) {
          fb.depth[px] = d;
          fb.triangle[px] = static_cast<int>(f);
          fb.barycentric[3 * px + 0] = b0;
          fb.barycentric[3 * px + 1] = b1;
          fb.barycentric[3 * px + 2] = b2;
        }
      }
    }
  }
  return fb;
}

RenderOutput render(const Points2& points, const Eigen::VectorXd& depth, const Triangles& triangles,
                    const Vertices& colors, int height, int width, const RasterOptions& options) {
  check_size("vertex colour rows", colors.rows(), points.rows());
  FragmentBuffers fb = rasterize(points, depth, triangles, height, width, options);
  RenderOutput out;
  out.image = Image(height, width, 3);
  out.mask = Image(height, width, 1);
  out.depth = Image(height, width, 1, std::numeric_limits<double>::infinity());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t px = fb.pixel(y, x);
      const int f = fb.triangle[px];
      if (f == kNoTriangle) continue;
      out.mask.at(y, x) = 1.0;
      out.depth.at(y, x) = fb.depth[px];
      for (int c = 0; c < 3; ++c) {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) v += fb.barycentric[3 * px + k] * colors(triangles(f, k), c);
        out.image.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  out.frag_triangle = std::move(fb.triangle);
  out.frag_barycentric = std::move(fb.barycentric);
  return out;
}

RenderGradients render_backward(const RenderOutput& output, const Points2& points,
                                const Triangles& triangles, const Vertices& colors,
                                const Image& grad_image) {
  if (!grad_image.same_shape(output.image)) {
    throw_data_error("image gradient is {}x{}x{}, render is {}x{}x{}", grad_image.height(),
                     grad_image.width(), grad_image.channels(), output.image.height(),
                     output.image.width(), output.image.channels());
  }
  RenderGradients g;
  g.colors = Vertices::Zero(colors.rows(), 3);
  g.points = Points2::Zero(points.rows(), 2);
  const int height = output.image.height(), width = output.image.width();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t px = static_cast<std::size_t>(y) * width + x;
      const int f = output.frag_triangle[px];
      if (f == kNoTriangle) continue;
      std::array<int, 3> v = {triangles(f, 0), triangles(f, 1), triangles(f, 2)};
      std::array<double, 3> b = {output.frag_barycentric[3 * px], output.frag_barycentric[3 * px + 1],
                                 output.frag_barycentric[3 * px + 2]};
      Eigen::Vector3d gc = Eigen::Vector3d::Zero();
      for (int c = 0; c < 3; ++c) {
        const double raw = b[0] * colors(v[0], c) + b[1] * colors(v[1], c) + b[2] * colors(v[2], c);
        if (raw >= 0.0 && raw <= 1.0) gc[c] = grad_image.at(y, x, c);
      }
      if (gc.isZero(0.0)) continue;
      std::array<double, 3> s;
      double s_bar = 0.0;
      for (int k = 0; k < 3; ++k) {
        g.colors.row(v[k]) += b[k] * gc.transpose();
        s[k] = colors.row(v[k]).dot(gc);
        s_bar += b[k] * s[k];
      }
      // d(b_i)/d(p_j) through the edge functions w_i = cross(p_{i+1} - q, p_{i+2} - q).
      std::array<Eigen::Vector2d, 3> p;
      for (int k = 0; k < 3; ++k) p[k] = points.row(v[k]).transpose();
      const double area = cross2(p[1] - p[0], p[2] - p[0]);
      const Eigen::Vector2d q(x + 0.5, y + 0.5);
      for (int i = 0; i < 3; ++i) {
        const double weight = (s[i] - s_bar) / area;
        const int j1 = (i + 1) % 3, j2 = (i + 2) % 3;
        const Eigen::Vector2d a = p[j1] - q, c = p[j2] - q;
        g.points.row(v[j1]) += weight * Eigen::RowVector2d(c.y(), -c.x());
        g.points.row(v[j2]) += weight * Eigen::RowVector2d(-a.y(), a.x());
      }
    }
  }
  return g;
}

}  // namespace mlaface
