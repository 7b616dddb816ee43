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

#include <cstdint>
#include <vector>

#include "depthgroup/geometry.hpp"
#include "depthgroup/grid.hpp"

namespace depthgroup {

/// Axis-aligned fronto-parallel box face in camera coordinates (meters, y up).
struct SceneBox {
  double x_min = -0.5, x_max = 0.5;
  double y_min = -1.2, y_max = -0.2;
  double z = 2.5;
  Rgb color{200, 60, 50};
};

/// Ground plane at y = -camera_height below a fronto-parallel back wall; boxes float in front.
struct SceneConfig {
  int rows = 160;
  int cols = 256;
  double focal = 200.0;   // fx = fy; principal point at (cols/2, 0)
  double camera_height = 1.6;
  double wall_depth = 4.0;
  Rgb ground_color{95, 95, 100};
  Rgb wall_color{170, 150, 120};
  int noise = 4;          // uniform per-channel colour noise amplitude
  std::vector<SceneBox> boxes{SceneBox{}};
};

struct Scene {
  DepthFrame frame;
  LabelGrid instances;  // 0 ground, 1 wall, 2 + k box k
};

Scene render_scene(const SceneConfig& config, const std::string& frame_id, std::uint64_t seed);

/// Default scene with one box whose size, depth and position are drawn from `seed`.
SceneConfig random_scene_config(std::uint64_t seed, int rows = 160, int cols = 256);

}  // namespace depthgroup
