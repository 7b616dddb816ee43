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

#include "depthgroup/boundary_graph.hpp"
#include "depthgroup/community.hpp"
#include "depthgroup/geometry.hpp"
#include "depthgroup/superpixels.hpp"

namespace depthgroup {

struct GroupingConfig {
  SlicConfig slic;
  GraphConfig graph;
  double t_e = 0.9;
  int normal_window = 5;
  std::uint64_t seed = 0;
};

struct GroupingResult {
  SuperpixelMap superpixels;
  BoundaryGraph graph;
  CommunityResult communities;
  RegionMap regions;
};

/// Depth frame -> superpixels -> boundary graph -> iterative community detection -> regions.
GroupingResult group_frame(const DepthFrame& frame, const GroupingConfig& config);

}  // namespace depthgroup
