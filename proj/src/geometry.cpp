// Copyright 2026 The depthgroup Authors
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

#include "depthgroup/geometry.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace depthgroup {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw InputError("intrinsics: focal lengths must be positive and finite");
  }
  if (width <= 0 || height <= 0) throw InputError("intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InputError("intrinsics: principal point outside the image");
  }
}

void DepthFrame::validate() const {
  intrinsics.validate();
  if (!depth.same_shape(intrinsics.height, intrinsics.width)) {
    throw InputError("frame '" + frame_id + "': depth size does not match intrinsics");
  }
  if (!rgb.same_shape(depth)) {
    throw InputError("frame '" + frame_id + "': rgb and depth sizes differ");
  }
  for (int r = 0; r < depth.rows(); ++r) {
    for (int c = 0; c < depth.cols(); ++c) {
      const double d = depth(r, c);
      if (!std::isfinite(d) || d <= 0.0) {
        std::ostringstream msg;
        msg << "frame '" << frame_id << "': invalid depth " << d << " at pixel (row " << r
            << ", col " << c << ")";
        throw InputError(msg.str());
      }
    }
  }
}

Eigen::Vector3d unproject_pixel(const CameraIntrinsics& k, double u, double v, double depth) {
  return {(u - k.cx) * depth / k.fx, -(v - k.cy) * depth / k.fy, depth};
}

ProjectedPixel project_point(const CameraIntrinsics& k, const Eigen::Vector3d& p) {
  return {p.x() * k.fx / p.z() + k.cx, -p.y() * k.fy / p.z() + k.cy, p.z()};
}

PointMap unproject(const DepthFrame& frame) {
  frame.validate();
  PointMap out{Grid<Eigen::Vector3d>(frame.rows(), frame.cols())};
  for (int r = 0; r < frame.rows(); ++r) {
    for (int c = 0; c < frame.cols(); ++c) {
      out.points(r, c) = unproject_pixel(frame.intrinsics, c, r, frame.depth(r, c));
    }
  }
  return out;
}

NormalMap compute_normals(const PointMap& points, int window) {
  if (window < 3 || window % 2 == 0) throw InputError("compute_normals: window must be odd and >= 3");
  const auto& pts = points.points;
  const int rows = pts.rows();
  const int cols = pts.cols();
  const int half = window / 2;
  NormalMap out{Grid<Eigen::Vector3d>(rows, cols, Eigen::Vector3d::Zero()), Mask(rows, cols, 0)};

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Eigen::Vector3d sum = Eigen::Vector3d::Zero();
      int n = 0;
      const int r0 = std::max(0, r - half), r1 = std::min(rows - 1, r + half);
      const int c0 = std::max(0, c - half), c1 = std::min(cols - 1, c + half);
      for (int rr = r0; rr <= r1; ++rr)
        for (int cc = c0; cc <= c1; ++cc) {
          sum += pts(rr, cc);
          ++n;
        }
      if (n < 3) continue;
      const Eigen::Vector3d mean = sum / n;
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (int rr = r0; rr <= r1; ++rr)
        for (int cc = c0; cc <= c1; ++cc) {
          const Eigen::Vector3d d = pts(rr, cc) - mean;
          cov.noalias() += d * d.transpose();
        }
      solver.compute(cov);
      const Eigen::Vector3d ev = solver.eigenvalues();
      // Collinear or coincident points span no plane.
      if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) continue;
      Eigen::Vector3d n_vec = solver.eigenvectors().col(0).normalized();
      if (n_vec.dot(pts(r, c)) > 0.0) n_vec = -n_vec;
      out.normals(r, c) = n_vec;
      out.defined(r, c) = 1;
    }
  }
  return out;
}

}  // namespace depthgroup
