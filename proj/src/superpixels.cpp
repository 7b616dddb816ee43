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

#include "depthgroup/superpixels.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace depthgroup {
namespace {

struct Center {
  double l, a, b, x, y;
};

class UnionFind {
 public:
  explicit UnionFind(int n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // `into` stays the root.
  void attach(int from, int into) { parent_[find(from)] = find(into); }

 private:
  std::vector<int> parent_;
};

double srgb_to_linear(double c) {
  c /= 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

Grid<Eigen::Vector3d> to_lab(const RgbImage& rgb) {
  Grid<Eigen::Vector3d> lab(rgb.rows(), rgb.cols());
  for (std::size_t i = 0; i < rgb.size(); ++i) lab[i] = rgb_to_lab(rgb[i]);
  return lab;
}

// Labels 4-connected components of equal label; returns component count.
int connected_components(const LabelGrid& labels, LabelGrid& comp) {
  const int rows = labels.rows(), cols = labels.cols();
  comp = LabelGrid(rows, cols, -1);
  int next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (comp(r, c) >= 0) continue;
      const int lab = labels(r, c);
      comp(r, c) = next;
      stack.assign(1, {r, c});
      while (!stack.empty()) {
        auto [pr, pc] = stack.back();
        stack.pop_back();
        constexpr std::array<std::array<int, 2>, 4> dirs{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
        for (auto [dr, dc] : dirs) {
          const int nr = pr + dr, nc = pc + dc;
          if (labels.contains(nr, nc) && comp(nr, nc) < 0 && labels(nr, nc) == lab) {
            comp(nr, nc) = next;
            stack.push_back({nr, nc});
          }
        }
      }
      ++next;
    }
  return next;
}

}  // namespace

Eigen::Vector3d rgb_to_lab(const Rgb& rgb) {
  const double r = srgb_to_linear(rgb[0]), g = srgb_to_linear(rgb[1]), b = srgb_to_linear(rgb[2]);
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  const double fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

SuperpixelMap slic_segment(const RgbImage& rgb, const SlicConfig& config) {
  const int rows = rgb.rows(), cols = rgb.cols();
  const long long pixels = static_cast<long long>(rows) * cols;
  if (config.target_count < 1) throw InputError("slic: target_count must be >= 1");
  if (!(config.compactness > 0.0)) throw InputError("slic: compactness must be positive");
  if (config.iterations < 1) throw InputError("slic: iterations must be >= 1");
  if (pixels == 0) throw InputError("slic: empty image");
  if (config.target_count > pixels) {
    throw InputError("slic: target_count " + std::to_string(config.target_count) + " exceeds pixel count " +
                     std::to_string(pixels));
  }

  const auto lab = to_lab(rgb);
  const double s = std::sqrt(static_cast<double>(pixels) / config.target_count);
  const int nx = std::clamp(static_cast<int>(std::lround(cols / s)), 1, cols);
  const int ny = std::clamp(static_cast<int>(std::lround(rows / s)), 1, rows);
  const double step_x = static_cast<double>(cols) / nx;
  const double step_y = static_cast<double>(rows) / ny;
  const double step = std::sqrt(step_x * step_y);
  const int reach_x = static_cast<int>(std::ceil(step_x));
  const int reach_y = static_cast<int>(std::ceil(step_y));

  auto gradient = [&](int r, int c) {
    if (r <= 0 || c <= 0 || r >= rows - 1 || c >= cols - 1) return std::numeric_limits<double>::infinity();
    return (lab(r, c + 1) - lab(r, c - 1)).squaredNorm() + (lab(r + 1, c) - lab(r - 1, c)).squaredNorm();
  };

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  LabelGrid labels(rows, cols, -1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int r = std::min(rows - 1, static_cast<int>((j + 0.5) * step_y));
      int c = std::min(cols - 1, static_cast<int>((i + 0.5) * step_x));
      // Move the seed off edges: lowest gradient in its 3x3 neighbourhood.
      int best_r = r, best_c = c;
      double best_g = gradient(r, c);
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const double g = gradient(r + dr, c + dc);
          if (g < best_g) {
            best_g = g;
            best_r = r + dr;
            best_c = c + dc;
          }
        }
      const auto& p = lab(best_r, best_c);
      centers.push_back({p(0), p(1), p(2), static_cast<double>(best_c), static_cast<double>(best_r)});
    }
  // Grid-cell labels cover any pixel no center reaches.
  LabelGrid fallback(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int j = std::min(ny - 1, static_cast<int>(r / step_y));
      const int i = std::min(nx - 1, static_cast<int>(c / step_x));
      fallback(r, c) = j * nx + i;
    }

  const double spatial_weight = (config.compactness / step) * (config.compactness / step);
  Grid<double> dist(rows, cols);
  std::vector<std::array<double, 6>> sums(centers.size());
  for (int it = 0; it < config.iterations; ++it) {
    dist.fill(std::numeric_limits<double>::infinity());
    labels.fill(-1);
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const Center& ck = centers[k];
      const int cr = static_cast<int>(std::lround(ck.y)), cc = static_cast<int>(std::lround(ck.x));
      const int r0 = std::max(0, cr - reach_y), r1 = std::min(rows - 1, cr + reach_y);
      const int c0 = std::max(0, cc - reach_x), c1 = std::min(cols - 1, cc + reach_x);
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c < c1 + 1; ++c) {
          const auto& p = lab(r, c);
          const double dl = p(0) - ck.l, da = p(1) - ck.a, db = p(2) - ck.b;
          const double dx = c - ck.x, dy = r - ck.y;
          const double d = dl * dl + da * da + db * db + (dx * dx + dy * dy) * spatial_weight;
          if (d < dist(r, c)) {
            dist(r, c) = d;
            labels(r, c) = static_cast<int>(k);
          }
        }
    }
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] < 0) labels[i] = fallback[i];

    for (auto& s6 : sums) s6.fill(0.0);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        auto& s6 = sums[labels(r, c)];
        const auto& p = lab(r, c);
        s6[0] += p(0);
        s6[1] += p(1);
        s6[2] += p(2);
        s6[3] += c;
        s6[4] += r;
        s6[5] += 1.0;
      }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const auto& s6 = sums[k];
      if (s6[5] == 0.0) continue;
      centers[k] = {s6[0] / s6[5], s6[1] / s6[5], s6[2] / s6[5], s6[3] / s6[5], s6[4] / s6[5]};
    }
  }

  // Connectivity: every fragment becomes a component; small ones are folded into a neighbour.
  LabelGrid comp;
  const int ncomp = connected_components(labels, comp);
  std::vector<int> size(ncomp, 0);
  std::vector<Eigen::Vector3d> lab_sum(ncomp, Eigen::Vector3d::Zero());
  for (std::size_t i = 0; i < comp.size(); ++i) {
    ++size[comp[i]];
    lab_sum[comp[i]] += lab[i];
  }
  std::vector<std::vector<int>> neighbours(ncomp);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int a = comp(r, c);
      if (c + 1 < cols && comp(r, c + 1) != a) {
        neighbours[a].push_back(comp(r, c + 1));
        neighbours[comp(r, c + 1)].push_back(a);
      }
      if (r + 1 < rows && comp(r + 1, c) != a) {
        neighbours[a].push_back(comp(r + 1, c));
        neighbours[comp(r + 1, c)].push_back(a);
      }
    }

  const double min_size = static_cast<double>(pixels) / static_cast<double>(centers.size()) / 4.0;
  UnionFind uf(ncomp);
  for (int i = 0; i < ncomp; ++i) {
    const int root = uf.find(i);
    if (size[root] >= min_size) continue;
    const Eigen::Vector3d mean = lab_sum[root] / size[root];
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int n : neighbours[i]) {
      const int nr = uf.find(n);
      if (nr == root) continue;
      const double d = (lab_sum[nr] / size[nr] - mean).squaredNorm();
      if (d < best_d || (d == best_d && nr < best)) {
        best_d = d;
        best = nr;
      }
    }
    if (best < 0) continue;
    uf.attach(root, best);
    size[best] += size[root];
    lab_sum[best] += lab_sum[root];
  }

  SuperpixelMap out{LabelGrid(rows, cols), 0};
  std::vector<int> relabel(ncomp, -1);
  for (std::size_t i = 0; i < comp.size(); ++i) {
    const int root = uf.find(comp[i]);
    if (relabel[root] < 0) relabel[root] = out.count++;
    out.labels[i] = relabel[root];
  }
  return out;
}

std::vector<SuperpixelNode> aggregate(const SuperpixelMap& map, const PointMap& points, const NormalMap& normals,
                                      const RgbImage& rgb) {
  const auto& labels = map.labels;
  if (!points.points.same_shape(labels) || !normals.normals.same_shape(labels) || !rgb.same_shape(labels) ||
      !normals.defined.same_shape(labels)) {
    throw InputError("aggregate: maps do not share dimensions");
  }
  std::vector<SuperpixelNode> nodes(map.count);
  std::vector<int> normal_count(map.count, 0);
  for (int i = 0; i < map.count; ++i) nodes[i].id = i;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 0 || l >= map.count) throw InputError("aggregate: label out of range");
    auto& n = nodes[l];
    n.centroid += points.points[i];
    n.mean_rgb += Eigen::Vector3d(rgb[i][0], rgb[i][1], rgb[i][2]);
    ++n.pixel_count;
    if (normals.defined[i]) {
      n.normal_y += normals.normals[i].y();
      ++normal_count[l];
    }
  }
  for (int i = 0; i < map.count; ++i) {
    auto& n = nodes[i];
    if (n.pixel_count == 0) throw InputError("aggregate: superpixel " + std::to_string(i) + " has no pixels");
    n.centroid /= n.pixel_count;
    n.mean_rgb /= n.pixel_count;
    n.normal_defined = normal_count[i] > 0;
    n.normal_y = n.normal_defined ? n.normal_y / normal_count[i] : 0.0;
  }
  return nodes;
}

}  // namespace depthgroup
