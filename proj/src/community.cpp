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

#include "depthgroup/community.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <tuple>

#include <json.hpp>

namespace depthgroup {
namespace {

constexpr double kMinImprovement = 1e-10;

inline double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

// One level of the flow network: nodes are leaf nodes or merged modules.
struct FlowLevel {
  int n = 0;
  std::vector<double> flow;  // visit rate
  std::vector<double> exit;  // flow on links leaving the node (self links excluded)
  std::vector<std::vector<std::pair<int, double>>> adj;  // per-direction link flow
};

FlowLevel leaf_level(const ConnectivityGraph& g) {
  std::vector<std::tuple<int, int, double>> links;
  double total = 0.0;
  for (const auto& e : g.edges) {
    if (e.i == e.j || !(e.strength > 0.0)) continue;
    links.emplace_back(std::min(e.i, e.j), std::max(e.i, e.j), e.strength);
    total += e.strength;
  }
  FlowLevel lvl;
  lvl.n = g.num_nodes;
  lvl.flow.assign(lvl.n, 0.0);
  lvl.exit.assign(lvl.n, 0.0);
  lvl.adj.assign(lvl.n, {});
  if (total <= 0.0) return lvl;
  std::sort(links.begin(), links.end());
  for (std::size_t k = 0; k < links.size();) {
    const auto [a, b, s0] = links[k];
    double s = 0.0;
    std::size_t end = k;
    while (end < links.size() && std::get<0>(links[end]) == a && std::get<1>(links[end]) == b) {
      s += std::get<2>(links[end]);
      ++end;
    }
    const double f = s / (2.0 * total);
    lvl.adj[a].emplace_back(b, f);
    lvl.adj[b].emplace_back(a, f);
    lvl.flow[a] += f;
    lvl.flow[b] += f;
    k = end;
  }
  lvl.exit = lvl.flow;
  return lvl;
}

double node_entropy_term(const FlowLevel& leaf) {
  double t = 0.0;
  for (double f : leaf.flow) t += plogp(f);
  return t;
}

struct ModuleStats {
  std::vector<double> flow, exit;
  std::vector<int> size;
  double sum_exit = 0.0, sum_plogp_exit = 0.0, sum_plogp_total = 0.0;

  void build(const FlowLevel& lvl, const std::vector<int>& assign, int modules) {
    flow.assign(modules, 0.0);
    exit.assign(modules, 0.0);
    size.assign(modules, 0);
    for (int a = 0; a < lvl.n; ++a) {
      const int m = assign[a];
      flow[m] += lvl.flow[a];
      ++size[m];
      for (const auto& [b, f] : lvl.adj[a])
        if (assign[b] != m) exit[m] += f;
    }
    resum();
  }
  void resum() {
    sum_exit = sum_plogp_exit = sum_plogp_total = 0.0;
    for (std::size_t m = 0; m < flow.size(); ++m) {
      sum_exit += exit[m];
      sum_plogp_exit += plogp(exit[m]);
      sum_plogp_total += plogp(exit[m] + flow[m]);
    }
  }
  double codelength(double node_term) const {
    return plogp(sum_exit) - 2.0 * sum_plogp_exit + sum_plogp_total - node_term;
  }
};

// Moves single level nodes between modules while the map equation decreases.
bool local_moving(const FlowLevel& lvl, std::vector<int>& assign, const std::vector<int>& order, int max_sweeps) {
  const int n = lvl.n;
  ModuleStats st;
  st.build(lvl, assign, n);
  std::vector<int> empty;
  for (int m = n - 1; m >= 0; --m)
    if (st.size[m] == 0) empty.push_back(m);

  std::vector<double> link_to(n, 0.0);
  std::vector<char> marked(n, 0);
  std::vector<int> touched;
  bool moved_any = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    int moves = 0;
    for (int a : order) {
      const int cur = assign[a];
      touched.clear();
      for (const auto& [b, f] : lvl.adj[a]) {
        const int m = assign[b];
        if (!marked[m]) {
          marked[m] = 1;
          touched.push_back(m);
        }
        link_to[m] += f;
      }
      const double e_cur = st.exit[cur], f_cur = st.flow[cur];
      const double e_cur_new = e_cur - lvl.exit[a] + 2.0 * link_to[cur];
      const double f_cur_new = f_cur - lvl.flow[a];

      auto delta_for = [&](int m) {
        const double e_m = st.exit[m], f_m = st.flow[m];
        const double e_m_new = e_m + lvl.exit[a] - 2.0 * link_to[m];
        const double f_m_new = f_m + lvl.flow[a];
        const double s_new = st.sum_exit - e_cur - e_m + e_cur_new + e_m_new;
        const double d_a = plogp(e_cur_new) + plogp(e_m_new) - plogp(e_cur) - plogp(e_m);
        const double d_b = plogp(e_cur_new + f_cur_new) + plogp(e_m_new + f_m_new) - plogp(e_cur + f_cur) -
                           plogp(e_m + f_m);
        return plogp(s_new) - plogp(st.sum_exit) - 2.0 * d_a + d_b;
      };

      int best_m = cur;
      double best_d = 0.0;
      auto consider = [&](int m) {
        if (m == cur) return;
        const double d = delta_for(m);
        if (d < best_d || (d == best_d && best_m != cur && m < best_m)) {
          best_d = d;
          best_m = m;
        }
      };
      std::sort(touched.begin(), touched.end());
      for (int m : touched) consider(m);
      if (st.size[cur] > 1 && !empty.empty()) consider(empty.back());

      if (best_m != cur && best_d < -kMinImprovement) {
        const double e_m_new = st.exit[best_m] + lvl.exit[a] - 2.0 * link_to[best_m];
        const double f_m_new = st.flow[best_m] + lvl.flow[a];
        if (st.size[best_m] == 0) empty.erase(std::find(empty.begin(), empty.end(), best_m));
        st.sum_exit += e_cur_new + e_m_new - st.exit[cur] - st.exit[best_m];
        st.sum_plogp_exit += plogp(e_cur_new) + plogp(e_m_new) - plogp(st.exit[cur]) - plogp(st.exit[best_m]);
        st.sum_plogp_total += plogp(e_cur_new + f_cur_new) + plogp(e_m_new + f_m_new) -
                              plogp(st.exit[cur] + st.flow[cur]) - plogp(st.exit[best_m] + st.flow[best_m]);
        st.exit[cur] = e_cur_new;
        st.flow[cur] = f_cur_new;
        st.exit[best_m] = e_m_new;
        st.flow[best_m] = f_m_new;
        --st.size[cur];
        ++st.size[best_m];
        if (st.size[cur] == 0) empty.push_back(cur);
        assign[a] = best_m;
        ++moves;
      }
      for (int m : touched) {
        link_to[m] = 0.0;
        marked[m] = 0;
      }
    }
    if (moves == 0) break;
    moved_any = true;
    st.resum();
  }
  return moved_any;
}

// Modules of `assign` (canonical, k modules) become the nodes of the returned level.
FlowLevel aggregate(const FlowLevel& lvl, const std::vector<int>& assign, int k) {
  FlowLevel out;
  out.n = k;
  out.flow.assign(k, 0.0);
  out.exit.assign(k, 0.0);
  out.adj.assign(k, {});
  std::vector<std::map<int, double>> links(k);
  for (int a = 0; a < lvl.n; ++a) {
    const int ma = assign[a];
    out.flow[ma] += lvl.flow[a];
    for (const auto& [b, f] : lvl.adj[a]) {
      const int mb = assign[b];
      if (ma != mb) links[ma][mb] += f;
    }
  }
  for (int m = 0; m < k; ++m)
    for (const auto& [nb, f] : links[m]) {
      out.adj[m].emplace_back(nb, f);
      out.exit[m] += f;
    }
  return out;
}

std::vector<int> make_order(int n, std::mt19937_64* rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (rng) std::shuffle(order.begin(), order.end(), *rng);
  return order;
}

std::vector<int> coarsen_optimize(const FlowLevel& leaf, std::vector<int> assign, std::mt19937_64* rng,
                                  const InfomapOptions& opt) {
  for (;;) {
    const int k = canonicalize(assign);
    const FlowLevel lvl = aggregate(leaf, assign, k);
    std::vector<int> modules(k);
    std::iota(modules.begin(), modules.end(), 0);
    if (!local_moving(lvl, modules, make_order(k, rng), opt.max_sweeps)) break;
    for (int& m : assign) m = modules[m];
  }
  canonicalize(assign);
  return assign;
}

double codelength_of(const FlowLevel& leaf, const std::vector<int>& assign, double node_term) {
  std::vector<int> a = assign;
  const int k = canonicalize(a);
  ModuleStats st;
  st.build(leaf, a, k);
  return st.codelength(node_term);
}

bool connected_with_flow(const FlowLevel& leaf) {
  if (leaf.n == 0) return false;
  for (double f : leaf.flow)
    if (!(f > 0.0)) return false;
  std::vector<char> seen(leaf.n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int a = stack.back();
    stack.pop_back();
    for (const auto& [b, f] : leaf.adj[a])
      if (!seen[b]) {
        seen[b] = 1;
        ++count;
        stack.push_back(b);
      }
  }
  return count == leaf.n;
}

}  // namespace

ConnectivityGraph ConnectivityGraph::from_boundary(const BoundaryGraph& graph) {
  std::vector<ConnectivityEdge> edges;
  edges.reserve(graph.edges.size());
  for (const auto& e : graph.edges) edges.push_back({e.i, e.j, 1.0 - e.weight});
  return from_edges(static_cast<int>(graph.nodes.size()), std::move(edges));
}

ConnectivityGraph ConnectivityGraph::from_edges(int num_nodes, std::vector<ConnectivityEdge> edges) {
  ConnectivityGraph g;
  g.num_nodes = num_nodes;
  g.edges = std::move(edges);
  g.initial_nodes.resize(num_nodes);
  for (int i = 0; i < num_nodes; ++i) g.initial_nodes[i] = {i};
  return g;
}

void ConnectivityGraph::validate() const {
  if (num_nodes < 0) throw InputError("connectivity graph: negative node count");
  for (const auto& e : edges) {
    if (e.i < 0 || e.j < 0 || e.i >= num_nodes || e.j >= num_nodes) {
      throw InputError("connectivity graph: edge endpoint out of range");
    }
    if (e.i == e.j) throw InputError("connectivity graph: self-loop");
    if (!(e.strength >= 0.0) || !std::isfinite(e.strength)) {
      throw InputError("connectivity graph: strengths must be finite and non-negative");
    }
  }
  if (!initial_nodes.empty() && static_cast<int>(initial_nodes.size()) != num_nodes) {
    throw InputError("connectivity graph: initial_nodes size mismatch");
  }
}

int canonicalize(std::vector<int>& assignment) {
  std::map<int, int> relabel;
  for (int& a : assignment) {
    auto [it, inserted] = relabel.try_emplace(a, static_cast<int>(relabel.size()));
    a = it->second;
  }
  return static_cast<int>(relabel.size());
}

double map_equation(const ConnectivityGraph& graph, std::span<const int> assignment) {
  if (static_cast<int>(assignment.size()) != graph.num_nodes) throw InputError("map_equation: assignment size");
  const FlowLevel leaf = leaf_level(graph);
  return codelength_of(leaf, {assignment.begin(), assignment.end()}, node_entropy_term(leaf));
}

std::vector<int> enforce_module_limit(const ConnectivityGraph& graph, std::vector<int> assignment, int desired) {
  if (static_cast<int>(assignment.size()) != graph.num_nodes) throw InputError("enforce_module_limit: size");
  if (desired < 1) throw InputError("enforce_module_limit: desired must be >= 1");
  int k = canonicalize(assignment);
  if (k <= desired) return assignment;

  const FlowLevel leaf = leaf_level(graph);
  ModuleStats st;
  st.build(leaf, assignment, k);
  std::vector<std::map<int, double>> nbr(k);
  for (int a = 0; a < leaf.n; ++a)
    for (const auto& [b, f] : leaf.adj[a])
      if (assignment[a] != assignment[b]) nbr[assignment[a]][assignment[b]] += f;

  std::vector<int> rep(k);
  std::iota(rep.begin(), rep.end(), 0);
  int count = k;
  while (count > desired) {
    int best_a = -1, best_b = -1;
    double best_d = 0.0;
    for (int a = 0; a < k; ++a) {
      if (rep[a] != a) continue;
      for (const auto& [b, f] : nbr[a]) {
        if (b <= a) continue;
        const double e_new = st.exit[a] + st.exit[b] - 2.0 * f;
        const double fl_new = st.flow[a] + st.flow[b];
        const double s_new = st.sum_exit - 2.0 * f;
        const double d = plogp(s_new) - plogp(st.sum_exit) -
                         2.0 * (plogp(e_new) - plogp(st.exit[a]) - plogp(st.exit[b])) +
                         (plogp(e_new + fl_new) - plogp(st.exit[a] + st.flow[a]) - plogp(st.exit[b] + st.flow[b]));
        if (best_a < 0 || d < best_d) {
          best_d = d;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best_a < 0) break;
    const int a = best_a, b = best_b;
    const double f_ab = nbr[a][b];
    st.exit[a] = st.exit[a] + st.exit[b] - 2.0 * f_ab;
    st.flow[a] += st.flow[b];
    st.exit[b] = st.flow[b] = 0.0;
    nbr[a].erase(b);
    for (const auto& [c, f] : nbr[b]) {
      if (c == a) continue;
      nbr[a][c] += f;
      nbr[c].erase(b);
      nbr[c][a] += f;
    }
    nbr[b].clear();
    rep[b] = a;
    st.resum();
    --count;
  }
  for (int& m : assignment) {
    while (rep[m] != m) m = rep[m];
  }
  canonicalize(assignment);
  return assignment;
}

CommunityResult infomap_pass(const ConnectivityGraph& graph, int desired, std::uint64_t seed,
                             const InfomapOptions& options) {
  graph.validate();
  if (graph.num_nodes == 0) throw InputError("infomap_pass: empty graph");
  if (desired < 1) throw InputError("infomap_pass: desired_communities must be >= 1");

  const FlowLevel leaf = leaf_level(graph);
  CommunityResult result;
  std::vector<int> singletons(graph.num_nodes);
  std::iota(singletons.begin(), singletons.end(), 0);
  const bool has_flow = std::any_of(leaf.flow.begin(), leaf.flow.end(), [](double f) { return f > 0.0; });
  if (!has_flow) {
    result.assignment = singletons;
    result.num_communities = graph.num_nodes;
    return result;
  }

  const double node_term = node_entropy_term(leaf);
  std::vector<int> best;
  double best_len = 0.0;
  for (int trial = 0; trial < std::max(1, options.trials); ++trial) {
    std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(trial));
    std::mt19937_64* order_rng = trial == 0 ? nullptr : &rng;
    std::vector<int> assign = coarsen_optimize(leaf, singletons, order_rng, options);
    double len = codelength_of(leaf, assign, node_term);
    for (int round = 0; round < options.max_tune_rounds; ++round) {
      std::vector<int> tuned = assign;
      local_moving(leaf, tuned, make_order(leaf.n, order_rng), options.max_sweeps);
      tuned = coarsen_optimize(leaf, tuned, order_rng, options);
      const double tuned_len = codelength_of(leaf, tuned, node_term);
      if (!(tuned_len < len - kMinImprovement)) break;
      assign = std::move(tuned);
      len = tuned_len;
    }
    if (best.empty() || len < best_len - kMinImprovement) {
      best = std::move(assign);
      best_len = len;
    }
  }
  // The one-module solution competes as well.
  if (connected_with_flow(leaf)) {
    const std::vector<int> one(graph.num_nodes, 0);
    if (codelength_of(leaf, one, node_term) <= best_len) best = one;
  }

  result.assignment = enforce_module_limit(graph, std::move(best), desired);
  result.num_communities = canonicalize(result.assignment);
  result.codelength = codelength_of(leaf, result.assignment, node_term);
  return result;
}

CommunityResult iterative_group(const ConnectivityGraph& graph, double t_e, std::uint64_t seed,
                                const CommunityDetector& detector) {
  graph.validate();
  if (graph.num_nodes == 0) throw InputError("iterative_group: empty graph");
  if (!(t_e > 0.0 && t_e < 1.0)) throw InputError("iterative_group: t_e must lie in (0, 1)");
  const CommunityDetector detect =
      detector ? detector : [](const ConnectivityGraph& g, int desired, std::uint64_t s) {
        return infomap_pass(g, desired, s);
      };

  ConnectivityGraph current = graph;
  if (current.initial_nodes.empty()) {
    current.initial_nodes.resize(current.num_nodes);
    for (int i = 0; i < current.num_nodes; ++i) current.initial_nodes[i] = {i};
  }
  int original = 0;
  for (const auto& list : current.initial_nodes) original += static_cast<int>(list.size());

  CommunityResult out;
  out.assignment.assign(original, -1);
  int next_id = 0;
  while (current.num_nodes > 1) {
    ++out.iterations;
    const CommunityResult found = detect(current, current.num_nodes / 2, seed + out.iterations);
    std::vector<int> comm = found.assignment;
    if (static_cast<int>(comm.size()) != current.num_nodes) throw std::logic_error("detector size mismatch");
    const int k = canonicalize(comm);

    ConnectivityGraph next;
    next.num_nodes = k;
    next.initial_nodes.assign(k, {});
    for (int n = 0; n < current.num_nodes; ++n) {
      auto& dst = next.initial_nodes[comm[n]];
      dst.insert(dst.end(), current.initial_nodes[n].begin(), current.initial_nodes[n].end());
    }
    // Mean strength of the current edges linking each community pair.
    std::map<std::pair<int, int>, std::pair<double, int>> between;
    for (const auto& e : current.edges) {
      int a = comm[e.i], b = comm[e.j];
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      auto& acc = between[{a, b}];
      acc.first += e.strength;
      ++acc.second;
    }
    for (const auto& [key, acc] : between) {
      const double w = acc.first / acc.second;
      if (w > 0.0) next.edges.push_back({key.first, key.second, w});
    }

    // Fix communities whose outward boundary weights all exceed t_e. Removing a fixed community only
    // drops edges that already passed, so the outcome does not depend on visiting order.
    std::vector<char> fixed(k, 1);
    for (const auto& e : next.edges) {
      if (!(1.0 - e.strength > t_e)) fixed[e.i] = fixed[e.j] = 0;
    }
    std::vector<int> remap(k, -1);
    int remaining = 0;
    for (int c = 0; c < k; ++c) {
      if (fixed[c]) {
        for (int n : next.initial_nodes[c]) out.assignment[n] = next_id;
        ++next_id;
      } else {
        remap[c] = remaining++;
      }
    }
    ConnectivityGraph reduced;
    reduced.num_nodes = remaining;
    reduced.initial_nodes.resize(remaining);
    for (int c = 0; c < k; ++c)
      if (remap[c] >= 0) reduced.initial_nodes[remap[c]] = std::move(next.initial_nodes[c]);
    for (const auto& e : next.edges)
      if (remap[e.i] >= 0 && remap[e.j] >= 0) reduced.edges.push_back({remap[e.i], remap[e.j], e.strength});

    if (reduced.num_nodes >= current.num_nodes) {
      throw std::logic_error("iterative_group: node count failed to decrease");
    }
    current = std::move(reduced);
  }
  if (current.num_nodes == 1) {
    // The lone remaining community is assigned as a final round.
    ++out.iterations;
    for (int n : current.initial_nodes[0]) out.assignment[n] = next_id;
    ++next_id;
  }
  out.num_communities = next_id;
  return out;
}

RegionMap region_map_from_labels(LabelGrid labels, const DepthGrid& depth) {
  const bool use_depth = !depth.empty();
  if (use_depth && !depth.same_shape(labels)) throw InputError("region map: depth shape mismatch");
  int count = 0;
  for (auto v : labels.values()) {
    if (v < 0) throw InputError("region map: negative label");
    count = std::max(count, v + 1);
  }
  RegionMap out;
  out.regions.resize(count);
  std::vector<double> depth_sum(count, 0.0);
  for (int r = 0; r < labels.rows(); ++r)
    for (int c = 0; c < labels.cols(); ++c) {
      auto& reg = out.regions[labels(r, c)];
      reg.bbox.expand(r, c);
      ++reg.pixel_count;
      if (use_depth) depth_sum[labels(r, c)] += depth(r, c);
    }
  for (int i = 0; i < count; ++i) {
    auto& reg = out.regions[i];
    if (reg.pixel_count == 0) throw InputError("region map: labels are not contiguous (missing " + std::to_string(i) + ")");
    reg.id = i;
    reg.anchor_height = reg.bbox.top;
    reg.mean_depth = use_depth ? depth_sum[i] / reg.pixel_count : 0.0;
  }
  out.labels = std::move(labels);
  return out;
}

RegionMap regions_from_communities(const SuperpixelMap& superpixels, const CommunityResult& result,
                                   const DepthGrid& depth) {
  if (static_cast<int>(result.assignment.size()) != superpixels.count) {
    throw InputError("regions_from_communities: assignment does not cover all superpixels");
  }
  LabelGrid labels(superpixels.labels.rows(), superpixels.labels.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = result.assignment[superpixels.labels[i]];
    if (c < 0) throw InputError("regions_from_communities: unassigned superpixel");
    labels[i] = c;
  }
  return region_map_from_labels(std::move(labels), depth);
}

std::string region_table_to_json(const RegionMap& map) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : map.regions) {
    regions.push_back({{"id", r.id},
                       {"bbox", {r.bbox.top, r.bbox.left, r.bbox.bottom, r.bbox.right}},
                       {"pixel_count", r.pixel_count},
                       {"anchor_height", r.anchor_height},
                       {"mean_depth", r.mean_depth}});
  }
  return nlohmann::json{{"height", map.labels.rows()}, {"width", map.labels.cols()}, {"regions", regions}}.dump(1);
}

}  // namespace depthgroup
