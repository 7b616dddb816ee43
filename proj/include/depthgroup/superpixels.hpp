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

#include <vector>

#include <Eigen/Core>

#include "depthgroup/geometry.hpp"
#include "depthgroup/grid.hpp"

namespace depthgroup {

struct SlicConfig {
  int target_count = 10000;
  double compactness = 10.0;
  int iterations = 10;
};

/// Contiguous superpixel labels 0..count-1; each label is a single 4-connected component.
struct SuperpixelMap {
  LabelGrid labels;
  int count = 0;
};

struct SuperpixelNode {
  int id = 0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();  // mean camera-frame point
  double normal_y = 0.0;                              // mean upward normal over defined pixels
  bool normal_defined = false;
  int pixel_count = 0;
  Eigen::Vector3d mean_rgb = Eigen::Vector3d::Zero();
};

/// CIELAB (D65) of an sRGB pixel.
Eigen::Vector3d rgb_to_lab(const Rgb& rgb);

/// SLIC over CIELAB + pixel position, followed by a pass that folds fragments smaller than a
/// quarter of the mean cell size into their most colour-similar neighbour.
SuperpixelMap slic_segment(const RgbImage& rgb, const SlicConfig& config);

/// Per-superpixel means. Pixels with undefined normals are excluded from the normal mean only.
std::vector<SuperpixelNode> aggregate(const SuperpixelMap& map, const PointMap& points, const NormalMap& normals,
                                      const RgbImage& rgb);

}  // namespace depthgroup
