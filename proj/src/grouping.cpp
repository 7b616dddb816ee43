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

#include "depthgroup/grouping.hpp"

namespace depthgroup {

GroupingResult group_frame(const DepthFrame& frame, const GroupingConfig& config) {
  const PointMap points = unproject(frame);
  const NormalMap normals = compute_normals(points, config.normal_window);
  GroupingResult out;
  out.superpixels = slic_segment(frame.rgb, config.slic);
  auto nodes = aggregate(out.superpixels, points, normals, frame.rgb);
  out.graph = build_graph(out.superpixels, std::move(nodes), config.graph);
  out.communities = iterative_group(ConnectivityGraph::from_boundary(out.graph), config.t_e, config.seed);
  out.regions = regions_from_communities(out.superpixels, out.communities, frame.depth);
  return out;
}

}  // namespace depthgroup
