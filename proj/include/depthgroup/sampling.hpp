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
#include <string>
#include <vector>

#include "depthgroup/synthesis.hpp"

namespace depthgroup {

struct SampleCoord {
  int image_index = 0;
  int row = 0;
  int col = 0;
  friend auto operator<=>(const SampleCoord&, const SampleCoord&) = default;
};

enum class GroupKind { kPixel, kRegion };

std::string to_string(GroupKind kind);
GroupKind group_kind_from_string(const std::string& s);

/// Disjoint groups of coordinates declared mutually positive. Every group has at least 2 members.
struct GroupIndex {
  GroupKind kind = GroupKind::kPixel;
  std::vector<std::vector<SampleCoord>> groups;

  std::size_t num_coords() const;
  void validate() const;
};

/// Groups of final-image coordinates that show the same source pixel. Identities are drawn uniformly
/// from those with at least two occurrences until `budget` coordinates are emitted.
GroupIndex pixel_groups(const SyntheticSample& sample, int budget, std::uint64_t seed);

/// `budget` distinct coordinates drawn uniformly over all pixels, grouped by (source frame, region id).
GroupIndex region_groups(const SyntheticSample& sample, int budget, std::uint64_t seed);

/// Divides coordinates by `stride`, drops duplicates (first occurrence wins) and groups left with < 2 members.
GroupIndex downsample(const GroupIndex& index, int stride);

/// Row indices into the flat coordinate list (group order, then member order).
std::vector<std::vector<int>> row_groups(const GroupIndex& index);

std::string group_index_to_json(const GroupIndex& index);
GroupIndex group_index_from_json(const std::string& text);

/// Flat little-endian table of u32 (image_index, row, col, group_id), no header.
void write_group_table(const std::filesystem::path& path, const GroupIndex& index);
GroupIndex read_group_table(const std::filesystem::path& path, GroupKind kind);

}  // namespace depthgroup
