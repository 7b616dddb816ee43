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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "depthgroup/synthesis.hpp"

namespace depthgroup {

namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

struct FrameEntry {
  std::string frame_id;
  fs::path rgb;
  fs::path depth;
  std::optional<fs::path> intrinsics;
  std::optional<fs::path> gt_instances;
  std::optional<fs::path> gt_semantic;
};

/// Dataset manifest. Relative paths resolve against `root`, which itself resolves against the
/// manifest's directory.
struct Manifest {
  fs::path path;
  fs::path root;
  std::vector<FrameEntry> frames;
  std::optional<std::uint64_t> seed;
  nlohmann::json config = nlohmann::json::object();  // per-stage defaults, e.g. {"group": {"superpixels": 4000}}

  DepthFrame load_frame(std::size_t i) const;
  /// Hash over frame ids and the bytes of every referenced file.
  std::string content_hash() const;
};

Manifest load_manifest(const fs::path& path);
void write_manifest(const fs::path& path, const Manifest& manifest);

/// Provenance record stored as stamp.json in every stage directory.
struct Stamp {
  std::string stage;
  nlohmann::json params = nlohmann::json::object();
  std::map<std::string, std::string> upstream;  // name -> hash at the time the stage ran

  std::string hash() const;
  nlohmann::json to_json() const;
  static Stamp from_json(const nlohmann::json& j);
};

void write_stamp(const fs::path& stage_dir, const Stamp& stamp);
std::optional<Stamp> read_stamp(const fs::path& stage_dir);

/// Writes images and id maps as PNG, depths as 16-bit PNG with a scale sidecar, and the artifact list
/// plus transform table as sample.json.
void save_sample(const fs::path& dir, const SyntheticSample& sample);
/// Visibility masks are rebuilt from the instance maps.
SyntheticSample load_sample(const fs::path& dir);

}  // namespace depthgroup
