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
#include <vector>

#include "depthgroup/superpixels.hpp"

namespace depthgroup {

/// Logistic edge model weights: W = sigmoid(w_ocln * D_ocln + w_sup * D_sup + bias).
struct GraphConfig {
  double w_ocln = 48.0;
  double w_sup = 200.0;
  double bias = -4.0;

  void validate() const;
};

struct BoundaryEdge {
  int i = 0;  // i < j
  int j = 0;
  double weight = 0.0;  // boundary likelihood, strictly inside (0, 1)
  int border_length = 0;
};

struct BoundaryGraph {
  std::vector<SuperpixelNode> nodes;
  std::vector<BoundaryEdge> edges;  // sorted by (i, j)
};

/// Centroid distance normalised by joint depth.
double occlusion_distance(const SuperpixelNode& a, const SuperpixelNode& b);

/// Supporting-boundary term with `low` playing the ground role. Zero when low.y >= 0.
double support_distance(const SuperpixelNode& low, const SuperpixelNode& high);

double sigmoid(double x);

/// Orders the pair by height internally (smaller y is the ground candidate, ties by id).
double edge_weight(const SuperpixelNode& a, const SuperpixelNode& b, const GraphConfig& config);

/// One edge per 4-adjacent label pair; border_length counts the adjacent pixel pairs.
BoundaryGraph build_graph(const SuperpixelMap& map, std::vector<SuperpixelNode> nodes, const GraphConfig& config);

std::string graph_to_json(const BoundaryGraph& graph);

}  // namespace depthgroup
