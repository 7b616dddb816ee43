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

#include "depthgroup/boundary_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include <json.hpp>

namespace depthgroup {

void GraphConfig::validate() const {
  if (!std::isfinite(w_ocln) || !std::isfinite(w_sup) || !std::isfinite(bias)) {
    throw InputError("graph config: weights must be finite");
  }
}

double occlusion_distance(const SuperpixelNode& a, const SuperpixelNode& b) {
  return (a.centroid - b.centroid).norm() / (a.centroid.z() + b.centroid.z());
}

double support_distance(const SuperpixelNode& low, const SuperpixelNode& high) {
  const double y1 = low.centroid.y();
  if (y1 >= 0.0) return 0.0;
  return std::max(low.normal_y, 0.0) * std::max(low.normal_y - high.normal_y, 0.0) * y1 * y1;
}

double sigmoid(double x) {
  // Saturate at the representable neighbours of 0 and 1 so W stays strictly inside (0, 1).
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  static const double hi = std::nextafter(1.0, 0.0);
  const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(s, lo, hi);
}

double edge_weight(const SuperpixelNode& a, const SuperpixelNode& b, const GraphConfig& config) {
  const bool a_low = a.centroid.y() < b.centroid.y() || (a.centroid.y() == b.centroid.y() && a.id <= b.id);
  const SuperpixelNode& low = a_low ? a : b;
  const SuperpixelNode& high = a_low ? b : a;
  return sigmoid(config.w_ocln * occlusion_distance(low, high) + config.w_sup * support_distance(low, high) +
                 config.bias);
}

BoundaryGraph build_graph(const SuperpixelMap& map, std::vector<SuperpixelNode> nodes, const GraphConfig& config) {
  config.validate();
  if (static_cast<int>(nodes.size()) != map.count) throw InputError("build_graph: node count mismatch");
  const auto& labels = map.labels;
  std::vector<std::uint64_t> pairs;
  auto push = [&](int a, int b) {
    if (a == b) return;
    if (a > b) std::swap(a, b);
    pairs.push_back((static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b));
  };
  for (int r = 0; r < labels.rows(); ++r)
    for (int c = 0; c < labels.cols(); ++c) {
      if (c + 1 < labels.cols()) push(labels(r, c), labels(r, c + 1));
      if (r + 1 < labels.rows()) push(labels(r, c), labels(r + 1, c));
    }
  std::sort(pairs.begin(), pairs.end());

  BoundaryGraph g;
  for (std::size_t k = 0; k < pairs.size();) {
    std::size_t end = k;
    while (end < pairs.size() && pairs[end] == pairs[k]) ++end;
    BoundaryEdge e;
    e.i = static_cast<int>(pairs[k] >> 32);
    e.j = static_cast<int>(pairs[k] & 0xffffffffu);
    e.border_length = static_cast<int>(end - k);
    e.weight = edge_weight(nodes[e.i], nodes[e.j], config);
    g.edges.push_back(e);
    k = end;
  }
  g.nodes = std::move(nodes);
  return g;
}

std::string graph_to_json(const BoundaryGraph& graph) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : graph.nodes) {
    nodes.push_back({{"id", n.id},
                     {"centroid", {n.centroid.x(), n.centroid.y(), n.centroid.z()}},
                     {"normal_y", n.normal_y},
                     {"normal_defined", n.normal_defined},
                     {"pixel_count", n.pixel_count},
                     {"mean_rgb", {n.mean_rgb.x(), n.mean_rgb.y(), n.mean_rgb.z()}}});
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : graph.edges) {
    edges.push_back({{"i", e.i}, {"j", e.j}, {"weight", e.weight}, {"border_length", e.border_length}});
  }
  return nlohmann::json{{"nodes", nodes}, {"edges", edges}}.dump(1);
}

}  // namespace depthgroup
