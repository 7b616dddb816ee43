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

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace depthgroup::oracle {
namespace {

double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

}  // namespace

double codelength(int num_nodes, const std::vector<ConnectivityEdge>& edges, const std::vector<int>& assignment) {
  double total = 0.0;
  for (const auto& e : edges) total += e.strength;
  if (total <= 0.0) return 0.0;
  std::vector<double> p(num_nodes, 0.0);
  for (const auto& e : edges) {
    p[e.i] += e.strength / (2.0 * total);
    p[e.j] += e.strength / (2.0 * total);
  }
  const int k = *std::max_element(assignment.begin(), assignment.end()) + 1;
  std::vector<double> exit(k, 0.0), flow(k, 0.0);
  for (int n = 0; n < num_nodes; ++n) flow[assignment[n]] += p[n];
  for (const auto& e : edges) {
    if (assignment[e.i] == assignment[e.j]) continue;
    exit[assignment[e.i]] += e.strength / (2.0 * total);
    exit[assignment[e.j]] += e.strength / (2.0 * total);
  }
  double sum_exit = 0.0, l = 0.0;
  for (int m = 0; m < k; ++m) {
    sum_exit += exit[m];
    l += -2.0 * plogp(exit[m]) + plogp(exit[m] + flow[m]);
  }
  l += plogp(sum_exit);
  for (double v : p) l -= plogp(v);
  return l;
}

std::vector<int> exhaustive_partition(const ConnectivityGraph& graph) {
  const int n = graph.num_nodes;
  std::vector<int> singletons(n);
  std::iota(singletons.begin(), singletons.end(), 0);
  double total = 0.0;
  for (const auto& e : graph.edges) total += e.strength;
  if (total <= 0.0) return singletons;

  // Incremental module statistics while assigning nodes 0..n-1 in order. Edges to not-yet-assigned
  // nodes count as exits until the partner joins the same module.
  std::vector<std::vector<std::pair<int, double>>> adj(n);
  std::vector<double> p(n, 0.0);
  for (const auto& e : graph.edges) {
    const double f = e.strength / (2.0 * total);
    adj[e.i].push_back({e.j, f});
    adj[e.j].push_back({e.i, f});
    p[e.i] += f;
    p[e.j] += f;
  }
  double node_term = 0.0;
  for (double v : p) node_term += plogp(v);

  std::vector<int> current(n, -1), best;
  std::vector<double> exit(n, 0.0), flow(n, 0.0);
  double best_l = std::numeric_limits<double>::infinity();

  auto evaluate = [&](int modules) {
    double sum_exit = 0.0, l = 0.0;
    for (int m = 0; m < modules; ++m) {
      sum_exit += exit[m];
      l += -2.0 * plogp(exit[m]) + plogp(exit[m] + flow[m]);
    }
    return l + plogp(sum_exit) - node_term;
  };

  auto recurse = [&](auto&& self, int v, int modules) -> void {
    if (v == n) {
      const double l = evaluate(modules);
      if (l < best_l - 1e-12) {
        best_l = l;
        best = current;
      }
      return;
    }
    for (int m = 0; m <= modules; ++m) {
      double inside = 0.0;
      for (const auto& [u, f] : adj[v])
        if (u < v && current[u] == m) inside += f;
      const double delta = p[v] - 2.0 * inside;
      current[v] = m;
      exit[m] += delta;
      flow[m] += p[v];
      self(self, v + 1, std::max(modules, m + 1));
      exit[m] -= delta;
      flow[m] -= p[v];
      if (m == modules) exit[m] = flow[m] = 0.0;
    }
    current[v] = -1;
  };
  recurse(recurse, 0, 0);
  return best;
}

CommunityResult exhaustive_detector(const ConnectivityGraph& graph, int desired, std::uint64_t) {
  std::vector<int> a = enforce_module_limit(graph, exhaustive_partition(graph), std::max(desired, 1));
  CommunityResult r;
  r.num_communities = canonicalize(a);
  r.assignment = std::move(a);
  r.codelength = codelength(graph.num_nodes, graph.edges, r.assignment);
  return r;
}

std::vector<int> literal_iterative_group(const ConnectivityGraph& graph, double t_e, std::uint64_t seed,
                                         const CommunityDetector& detect) {
  struct Node {
    std::vector<int> initial_nodes;
    int c = -1;
  };
  struct Graph {
    std::vector<Node> nodes;
    std::map<std::pair<int, int>, double> edges;  // (a, b) with a < b, by position in `nodes`
  };
  const int original = graph.num_nodes;
  std::vector<int> ultimate(original, -1);

  Graph g;
  for (int n = 0; n < original; ++n) g.nodes.push_back({{n}, -1});
  for (const auto& e : graph.edges) g.edges[{std::min(e.i, e.j), std::max(e.i, e.j)}] = e.strength;
  int next_id = 0;
  int iteration = 0;

  while (g.nodes.size() > 1) {
    ++iteration;
    ConnectivityGraph cg;
    cg.num_nodes = static_cast<int>(g.nodes.size());
    for (const auto& [key, s] : g.edges) cg.edges.push_back({key.first, key.second, s});
    for (const auto& n : g.nodes) cg.initial_nodes.push_back(n.initial_nodes);
    const std::vector<int> community = detect(cg, cg.num_nodes / 2, seed + iteration).assignment;
    for (std::size_t n = 0; n < g.nodes.size(); ++n) g.nodes[n].c = community[n];

    Graph next;
    std::vector<int> uniq(community.begin(), community.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::map<int, int> position;
    for (int c : uniq) {
      position[c] = static_cast<int>(next.nodes.size());
      Node node;
      for (const auto& n : g.nodes)
        if (n.c == c) node.initial_nodes.insert(node.initial_nodes.end(), n.initial_nodes.begin(), n.initial_nodes.end());
      next.nodes.push_back(std::move(node));
    }
    for (std::size_t a = 0; a < next.nodes.size(); ++a)
      for (std::size_t b = a + 1; b < next.nodes.size(); ++b) {
        double sum = 0.0;
        int count = 0;
        for (const auto& [key, s] : g.edges) {
          const int ca = position[g.nodes[key.first].c], cb = position[g.nodes[key.second].c];
          if ((ca == static_cast<int>(a) && cb == static_cast<int>(b)) ||
              (ca == static_cast<int>(b) && cb == static_cast<int>(a))) {
            sum += s;
            ++count;
          }
        }
        if (count == 0) continue;
        const double weight = sum / count;
        if (weight > 0.0) next.edges[{static_cast<int>(a), static_cast<int>(b)}] = weight;
      }
    // Remove separated communities. Boundary weight of an edge is 1 - strength.
    std::vector<char> removed(next.nodes.size(), 0);
    for (std::size_t a = 0; a < next.nodes.size(); ++a) {
      bool all_above = true;
      for (const auto& [key, s] : next.edges) {
        if (key.first != static_cast<int>(a) && key.second != static_cast<int>(a)) continue;
        const int b = key.first == static_cast<int>(a) ? key.second : key.first;
        if (removed[b]) continue;
        if (!(1.0 - s > t_e)) all_above = false;
      }
      if (!all_above) continue;
      for (int n : next.nodes[a].initial_nodes) ultimate[n] = next_id;
      ++next_id;
      removed[a] = 1;
    }
    Graph kept;
    std::vector<int> remap(next.nodes.size(), -1);
    for (std::size_t a = 0; a < next.nodes.size(); ++a)
      if (!removed[a]) {
        remap[a] = static_cast<int>(kept.nodes.size());
        kept.nodes.push_back(next.nodes[a]);
      }
    for (const auto& [key, s] : next.edges)
      if (!removed[key.first] && !removed[key.second]) kept.edges[{remap[key.first], remap[key.second]}] = s;
    g = std::move(kept);
  }
  if (g.nodes.size() == 1) {
    for (int n : g.nodes[0].initial_nodes) ultimate[n] = next_id;
  }
  return ultimate;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, long> joint;
  std::map<int, long> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++ra[a[i]];
    ++rb[b[i]];
  }
  auto c2 = [](long n) { return n * (n - 1) / 2.0; };
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [k, v] : joint) index += c2(v);
  for (const auto& [k, v] : ra) sa += c2(v);
  for (const auto& [k, v] : rb) sb += c2(v);
  const double expected = sa * sb / c2(static_cast<long>(a.size()));
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

ConnectivityGraph random_structured_graph(std::mt19937_64& rng, int num_nodes) {
  std::uniform_real_distribution<double> strong(0.5, 1.0), weak(0.01, 0.3), unit(0.0, 1.0);
  const int groups = std::uniform_int_distribution<int>(1, std::max(1, num_nodes / 2))(rng);
  std::vector<int> group(num_nodes);
  for (int n = 0; n < num_nodes; ++n) group[n] = n < groups ? n : std::uniform_int_distribution<int>(0, groups - 1)(rng);
  std::shuffle(group.begin(), group.end(), rng);
  std::vector<ConnectivityEdge> edges;
  for (int i = 0; i < num_nodes; ++i)
    for (int j = i + 1; j < num_nodes; ++j) {
      if (group[i] == group[j] && unit(rng) < 0.85) edges.push_back({i, j, strong(rng)});
      else if (group[i] != group[j] && unit(rng) < 0.2) edges.push_back({i, j, weak(rng)});
    }
  // Spanning chain over a random order keeps the graph connected.
  std::vector<int> order(num_nodes);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (int k = 1; k < num_nodes; ++k) {
    const int i = std::min(order[k - 1], order[k]), j = std::max(order[k - 1], order[k]);
    const bool exists = std::any_of(edges.begin(), edges.end(), [&](const auto& e) { return e.i == i && e.j == j; });
    if (!exists) edges.push_back({i, j, group[i] == group[j] ? strong(rng) : weak(rng)});
  }
  return ConnectivityGraph::from_edges(num_nodes, std::move(edges));
}

ConnectivityGraph planted_partition(std::uint64_t seed, int blocks, int block_size, double p_in, double p_out,
                                    std::vector<int>& truth) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = blocks * block_size;
  truth.resize(n);
  for (int i = 0; i < n; ++i) truth[i] = i / block_size;
  std::vector<ConnectivityEdge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (unit(rng) < (truth[i] == truth[j] ? p_in : p_out)) edges.push_back({i, j, 1.0});
  return ConnectivityGraph::from_edges(n, std::move(edges));
}

ConnectivityGraph chain_of_three(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(3, 4);
  std::uniform_real_distribution<double> intra(0.85, 0.99), weak_bridge(0.005, 0.05), strong_bridge(0.3, 0.7);
  const int sizes[3] = {size(rng), size(rng), size(rng)};
  std::vector<int> start{0, sizes[0], sizes[0] + sizes[1]};
  const int n = sizes[0] + sizes[1] + sizes[2];
  std::vector<ConnectivityEdge> edges;
  for (int c = 0; c < 3; ++c)
    for (int i = start[c]; i < start[c] + sizes[c]; ++i)
      for (int j = i + 1; j < start[c] + sizes[c]; ++j) edges.push_back({i, j, intra(rng)});
  edges.push_back({start[1] - 1, start[1], weak_bridge(rng)});
  edges.push_back({start[2] - 1, start[2], strong_bridge(rng)});
  return ConnectivityGraph::from_edges(n, std::move(edges));
}

double brute_force_assignment(const Eigen::MatrixXd& weight, bool maximize) {
  const bool transpose = weight.rows() > weight.cols();
  const Eigen::MatrixXd w = transpose ? Eigen::MatrixXd(weight.transpose()) : weight;
  std::vector<int> cols(w.cols());
  std::iota(cols.begin(), cols.end(), 0);
  double best = maximize ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  // Every permutation of the columns; the first rows() entries give the injection.
  std::set<std::vector<int>> seen;
  do {
    std::vector<int> head(cols.begin(), cols.begin() + w.rows());
    if (!seen.insert(head).second) continue;
    double total = 0.0;
    for (int r = 0; r < w.rows(); ++r) total += w(r, head[r]);
    best = maximize ? std::max(best, total) : std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

RowMatrix<double> sinkhorn_linear(const RowMatrix<double>& p, double tau, double eps, int iters) {
  RowMatrix<double> q = p.array().pow(tau / eps).matrix();
  const double n = static_cast<double>(p.rows()), k = static_cast<double>(p.cols());
  for (int it = 0; it < iters; ++it) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) q.col(j) *= (n / k) / q.col(j).sum();
    for (Eigen::Index i = 0; i < q.rows(); ++i) q.row(i) /= q.row(i).sum();
  }
  return q;
}

void jacobi_eigen(Eigen::MatrixXd a, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) > a(y, y); });
  values.resize(n);
  vectors.resize(n, n);
  for (int k = 0; k < n; ++k) {
    values(k) = a(order[k], order[k]);
    vectors.col(k) = v.col(order[k]);
  }
}

RowMatrix<double> random_unit_rows(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> g;
  RowMatrix<double> m(n, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = g(rng);
    m.row(i) /= m.row(i).norm();
  }
  return m;
}

double gradient_check_error(const RowMatrix<double>& z, const RowMatrix<double>& c,
                            const std::vector<std::vector<int>>& groups, double tau, double h) {
  SinkhornConfig sk;
  sk.until_converged = true;
  const LossResult<double> res = loss_gradient(z, c, groups, tau, sk);
  RowMatrix<double> dz, dc;
  raw_gradient(z, c, res.p, res.qbar, tau, dz, dc);
  auto loss_at = [&](const RowMatrix<double>& zz, const RowMatrix<double>& cc) {
    // Plain softmax cross-entropy, independent of soft_assign/swap_loss.
    double total = 0.0;
    for (Eigen::Index n = 0; n < zz.rows(); ++n) {
      Eigen::VectorXd logits = cc * zz.row(n).transpose() / tau;
      const double mx = logits.maxCoeff();
      const double lse = mx + std::log((logits.array() - mx).exp().sum());
      for (Eigen::Index k = 0; k < cc.rows(); ++k) total -= res.qbar(n, k) * (logits(k) - lse);
    }
    return total / static_cast<double>(zz.rows());
  };
  double worst = 0.0;
  auto compare = [&](double analytic, double numeric) {
    worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
  };
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      RowMatrix<double> zp = z, zm = z;
      zp(i, j) += h;
      zm(i, j) -= h;
      compare(dz(i, j), (loss_at(zp, c) - loss_at(zm, c)) / (2.0 * h));
    }
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
      RowMatrix<double> cp = c, cm = c;
      cp(i, j) += h;
      cm(i, j) -= h;
      compare(dc(i, j), (loss_at(z, cp) - loss_at(z, cm)) / (2.0 * h));
    }
  return worst;
}

std::vector<LabelGrid> resimulate_instances(const SyntheticSample& sample, std::span<const DepthFrame> frames,
                                            std::span<const RegionMap> regions) {
  std::vector<LabelGrid> out;
  for (std::size_t img = 0; img < sample.images.size(); ++img) {
    const DepthFrame& bg = frames[sample.background_index[img]];
    const int rows = bg.rows(), cols = bg.cols();
    const Affine bg_inv = sample.background_transforms[img].inverse();
    LabelGrid inst(rows, cols, 0);
    DepthGrid depth(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const Point2 p = bg_inv.apply(c, r);
        depth(r, c) = bg.depth(std::clamp(round_pixel(p.y), 0, rows - 1), std::clamp(round_pixel(p.x), 0, cols - 1));
      }
    for (const auto& rec : sample.records) {
      if (rec.target_image != static_cast<int>(img)) continue;
      const DepthFrame& src = frames[rec.source_index];
      const LabelGrid& labels = regions[rec.source_index].labels;
      const Affine inv = rec.affine.inverse();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          const Point2 s = inv.apply(c, r);
          const int sr = round_pixel(s.y), sc = round_pixel(s.x);
          if (!labels.contains(sr, sc) || labels(sr, sc) != rec.region_id) continue;
          const double d = src.depth(sr, sc) / rec.scale;
          if (d < depth(r, c)) {
            depth(r, c) = d;
            inst(r, c) = rec.instance_id;
          }
        }
    }
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace depthgroup::oracle
