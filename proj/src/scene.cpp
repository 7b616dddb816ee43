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

#include "depthgroup/scene.hpp"

#include <algorithm>
#include <random>

namespace depthgroup {

Scene render_scene(const SceneConfig& config, const std::string& frame_id, std::uint64_t seed) {
  if (config.rows < 2 || config.cols < 2) throw InputError("render_scene: image too small");
  const double scale = config.cols / 256.0;
  CameraIntrinsics k{config.focal * scale, config.focal * scale, config.cols / 2.0, 0.0, config.cols, config.rows};
  Scene s;
  s.frame.frame_id = frame_id;
  s.frame.intrinsics = k;
  s.frame.rgb = RgbImage(config.rows, config.cols);
  s.frame.depth = DepthGrid(config.rows, config.cols);
  s.instances = LabelGrid(config.rows, config.cols);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> noise(-config.noise, config.noise);
  for (int v = 0; v < config.rows; ++v)
    for (int u = 0; u < config.cols; ++u) {
      const double ground_depth = v > 0 ? config.camera_height * k.fy / v : config.wall_depth * 2.0;
      double depth = config.wall_depth;
      int inst = 1;
      Rgb color = config.wall_color;
      if (ground_depth <= config.wall_depth) {
        depth = ground_depth;
        inst = 0;
        color = config.ground_color;
      }
      for (std::size_t b = 0; b < config.boxes.size(); ++b) {
        const SceneBox& box = config.boxes[b];
        if (box.z >= depth) continue;
        const Eigen::Vector3d p = unproject_pixel(k, u, v, box.z);
        if (p.x() < box.x_min || p.x() > box.x_max || p.y() < box.y_min || p.y() > box.y_max) continue;
        depth = box.z;
        inst = 2 + static_cast<int>(b);
        color = box.color;
      }
      Rgb px;
      for (int ch = 0; ch < 3; ++ch) px[ch] = static_cast<std::uint8_t>(std::clamp(color[ch] + noise(rng), 0, 255));
      s.frame.rgb(v, u) = px;
      s.frame.depth(v, u) = depth;
      s.instances(v, u) = inst;
    }
  return s;
}

SceneConfig random_scene_config(std::uint64_t seed, int rows, int cols) {
  SceneConfig c;
  c.rows = rows;
  c.cols = cols;
  std::mt19937_64 rng(seed);
  auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  SceneBox b;
  b.z = u(2.0, 2.8);
  const double w = u(0.7, 1.2), h = u(0.7, 1.0), cx = u(-0.6, 0.6);
  b.x_min = cx - w / 2;
  b.x_max = cx + w / 2;
  b.y_min = u(-1.3, -1.1);
  b.y_max = b.y_min + h;
  b.color = {static_cast<std::uint8_t>(u(150, 230)), static_cast<std::uint8_t>(u(30, 90)),
             static_cast<std::uint8_t>(u(30, 90))};
  c.boxes = {b};
  return c;
}

}  // namespace depthgroup
