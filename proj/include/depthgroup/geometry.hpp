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

#pragma once

#include <string>

#include <Eigen/Core>

#include "depthgroup/grid.hpp"

namespace depthgroup {

/// Pinhole intrinsics in pixels.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws InputError unless fx, fy > 0 and the principal point lies inside the image.
  void validate() const;
  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// RGB image plus metric depth (meters) for one camera frame.
struct DepthFrame {
  RgbImage rgb;
  DepthGrid depth;
  CameraIntrinsics intrinsics;
  std::string frame_id;

  int rows() const { return depth.rows(); }
  int cols() const { return depth.cols(); }

  /// Checks shape agreement and that every depth value is finite and positive.
  void validate() const;
};

/// Per-pixel camera-frame coordinates. x right, y up, z forward; camera at the origin.
struct PointMap {
  Grid<Eigen::Vector3d> points;
};

/// Per-pixel unit normals oriented toward the camera. `defined` is 0 where the
/// local neighbourhood is degenerate; those normals are zero and must not be used.
struct NormalMap {
  Grid<Eigen::Vector3d> normals;
  Mask defined;
};

struct ProjectedPixel {
  double u = 0.0;  // column
  double v = 0.0;  // row
  double depth = 0.0;
};

Eigen::Vector3d unproject_pixel(const CameraIntrinsics& k, double u, double v, double depth);
ProjectedPixel project_point(const CameraIntrinsics& k, const Eigen::Vector3d& p);

/// Back-projects every pixel. Rejects non-positive or non-finite depth with the pixel location.
PointMap unproject(const DepthFrame& frame);

/// Least-squares plane fit over a square window (default 5x5) around every pixel.
NormalMap compute_normals(const PointMap& points, int window = 5);

}  // namespace depthgroup
