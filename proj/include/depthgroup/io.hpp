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

#include <filesystem>
#include <optional>
#include <string>

#include "depthgroup/geometry.hpp"
#include "depthgroup/grid.hpp"

namespace depthgroup::io {

namespace fs = std::filesystem;

/// Meters per stored unit used when this library writes 16-bit depth.
inline constexpr double kDefaultDepthScale = 1.0 / 256.0;

CameraIntrinsics read_intrinsics(const fs::path& path);
void write_intrinsics(const fs::path& path, const CameraIntrinsics& k);

RgbImage read_rgb(const fs::path& path);
void write_rgb(const fs::path& path, const RgbImage& image);

/// 8- or 16-bit single channel PNG.
LabelGrid read_label_png(const fs::path& path);
/// Writes a 16-bit PNG; every label must lie in [0, 65535].
void write_label_png(const fs::path& path, const LabelGrid& labels);

/// Sidecar for 16-bit depth PNGs: stem + ".json", holding {"scale": m_per_unit, "intrinsics": {...}}.
fs::path depth_sidecar_path(const fs::path& depth_png);

struct DepthFile {
  DepthGrid depth;
  std::optional<CameraIntrinsics> intrinsics;
};

/// Dispatches on extension: ".pfm" or ".png" (with sidecar).
DepthFile read_depth(const fs::path& path);
void write_depth_png(const fs::path& path, const DepthGrid& depth, double scale = kDefaultDepthScale,
                     const std::optional<CameraIntrinsics>& intrinsics = std::nullopt);

DepthGrid read_pfm(const fs::path& path);
void write_pfm(const fs::path& path, const DepthGrid& depth);

/// Loads rgb + depth (+ intrinsics file, or the depth sidecar's intrinsics) and validates.
DepthFrame load_frame(const std::string& frame_id, const fs::path& rgb, const fs::path& depth,
                      const std::optional<fs::path>& intrinsics);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace depthgroup::io
