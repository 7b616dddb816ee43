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
#include <functional>
#include <span>
#include <vector>

#include "depthgroup/boundary_graph.hpp"
#include "depthgroup/grid.hpp"
#include "depthgroup/superpixels.hpp"

namespace depthgroup {

struct ConnectivityEdge {
  int i = 0;
  int j = 0;
  double strength = 0.0;  // in [0, 1]; 1 - boundary weight
};

/// Undirected affinity graph. `initial_nodes[n]` lists the original node ids merged into node n.
struct ConnectivityGraph {
  int num_nodes = 0;
  std::vector<ConnectivityEdge> edges;
  std::vector<std::vector<int>> initial_nodes;

  /// Strength of each edge is 1 - W; every node starts as its own initial node.
  static ConnectivityGraph from_boundary(const BoundaryGraph& graph);
  /// Identity initial_nodes for a plain edge list.
  static ConnectivityGraph from_edges(int num_nodes, std::vector<ConnectivityEdge> edges);

  void validate() const;
};

/// Community ids are contiguous and canonical: numbered by the smallest member node id.
struct CommunityResult {
  std::vector<int> assignment;
  int num_communities = 0;
  double codelength = 0.0;  // map equation in bits (0 when undefined)
  int iterations = 0;       // iterative_group only
};

/// Relabels an arbitrary assignment to canonical contiguous ids; returns the community count.
int canonicalize(std::vector<int>& assignment);

/// Two-level map equation (bits) with undirected flow proportional to node strength.
/// Returns 0 for graphs without positive-strength edges.
double map_equation(const ConnectivityGraph& graph, std::span<const int> assignment);

/// Greedily merges the adjacent pair of modules whose merge least increases the map equation
/// until at most `desired` modules remain or no adjacent pair is left.
std::vector<int> enforce_module_limit(const ConnectivityGraph& graph, std::vector<int> assignment, int desired);

struct InfomapOptions {
  int trials = 4;
  int max_sweeps = 100;
  int max_tune_rounds = 20;
};

/// Map-equation partition via repeated node moves and coarsening (with fine-tuning rounds),
/// best of several seeded trials, then `enforce_module_limit`.
CommunityResult infomap_pass(const ConnectivityGraph& graph, int desired, std::uint64_t seed,
                             const InfomapOptions& options = {});

using CommunityDetector = std::function<CommunityResult(const ConnectivityGraph&, int desired, std::uint64_t seed)>;

/// Repeated detection with target N/2, coarsening by mean edge strength, and fixing of communities
/// whose outward boundary weights (1 - strength) all exceed `t_e`. Returns ultimate ids per
/// original node. An empty detector means `infomap_pass` with default options.
CommunityResult iterative_group(const ConnectivityGraph& graph, double t_e, std::uint64_t seed,
                                const CommunityDetector& detector = {});

struct RegionInfo {
  int id = 0;
  BoundingBox bbox;
  int pixel_count = 0;
  int anchor_height = 0;  // top row of the region
  double mean_depth = 0.0;
};

struct RegionMap {
  LabelGrid labels;
  std::vector<RegionInfo> regions;
};

/// Broadcasts superpixel communities back to pixels. `depth` may be empty, leaving mean_depth 0.
RegionMap regions_from_communities(const SuperpixelMap& superpixels, const CommunityResult& result,
                                   const DepthGrid& depth = {});

/// Recomputes region metadata from a label image (labels must be contiguous from 0).
RegionMap region_map_from_labels(LabelGrid labels, const DepthGrid& depth = {});

std::string region_table_to_json(const RegionMap& map);

}  // namespace depthgroup
