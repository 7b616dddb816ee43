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

#include "depthgroup/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

namespace depthgroup {
namespace {

// Potentials method for n <= m; a[i][j] with 1-based indexing internally.
std::vector<int> hungarian_rows_le_cols(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows()), m = static_cast<int>(a.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

void check_pair(std::span<const LabelGrid> a, std::span<const LabelGrid> b, const char* what) {
  if (a.empty()) throw InputError(std::string(what) + ": empty dataset");
  if (a.size() != b.size()) throw InputError(std::string(what) + ": prediction and ground-truth counts differ");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].same_shape(b[i])) throw InputError(std::string(what) + ": image " + std::to_string(i) + " size mismatch");
}

}  // namespace

std::vector<int> hungarian_min(const Eigen::MatrixXd& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) return std::vector<int>(cost.rows(), -1);
  if (!cost.allFinite()) throw InputError("hungarian: costs must be finite");
  if (cost.rows() <= cost.cols()) return hungarian_rows_le_cols(cost);
  const std::vector<int> col_to_row = hungarian_rows_le_cols(cost.transpose());
  std::vector<int> row_to_col(cost.rows(), -1);
  for (std::size_t c = 0; c < col_to_row.size(); ++c) row_to_col[col_to_row[c]] = static_cast<int>(c);
  return row_to_col;
}

std::vector<int> hungarian_max(const Eigen::MatrixXd& weight) { return hungarian_min(-weight); }

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

ConfusionMatrix confusion_matrix(std::span<const LabelGrid> pred, std::span<const LabelGrid> gt, int num_classes,
                                 int ignore_value) {
  check_pair(pred, gt, "confusion_matrix");
  if (num_classes < 1) throw InputError("confusion_matrix: num_classes must be >= 1");
  int num_pred = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t k = 0; k < pred[i].size(); ++k) {
      const int g = gt[i][k];
      if (g == ignore_value) continue;
      if (g < 0 || g >= num_classes) throw InputError("confusion_matrix: gt label " + std::to_string(g) + " out of range");
      if (pred[i][k] < 0) throw InputError("confusion_matrix: negative prediction label");
      num_pred = std::max(num_pred, pred[i][k] + 1);
    }
  ConfusionMatrix cm{num_pred, num_classes, std::vector<std::int64_t>(static_cast<std::size_t>(num_pred) * num_classes, 0)};
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t k = 0; k < pred[i].size(); ++k)
      if (gt[i][k] != ignore_value) ++cm.at(pred[i][k], gt[i][k]);
  return cm;
}

MatchedMetrics matched_metrics(std::span<const LabelGrid> pred, std::span<const LabelGrid> gt, int num_classes,
                               int ignore_value) {
  MatchedMetrics m;
  m.confusion = confusion_matrix(pred, gt, num_classes, ignore_value);
  const auto& cm = m.confusion;
  const std::int64_t total = cm.total();
  if (total == 0) throw InputError("matched_metrics: no labelled pixels");
  Eigen::MatrixXd w(cm.num_pred, cm.num_gt);
  for (int p = 0; p < cm.num_pred; ++p)
    for (int g = 0; g < cm.num_gt; ++g) w(p, g) = static_cast<double>(cm.at(p, g));
  const std::vector<int> cluster_to_class = hungarian_max(w);
  m.class_to_cluster.assign(num_classes, -1);
  for (int p = 0; p < cm.num_pred; ++p)
    if (cluster_to_class[p] >= 0) m.class_to_cluster[cluster_to_class[p]] = p;

  std::vector<std::int64_t> pred_sum(cm.num_pred, 0), gt_sum(cm.num_gt, 0);
  for (int p = 0; p < cm.num_pred; ++p)
    for (int g = 0; g < cm.num_gt; ++g) {
      pred_sum[p] += cm.at(p, g);
      gt_sum[g] += cm.at(p, g);
    }
  std::int64_t correct = 0;
  double iou_sum = 0.0;
  int iou_count = 0;
  m.class_iou.assign(num_classes, std::numeric_limits<double>::quiet_NaN());
  for (int g = 0; g < num_classes; ++g) {
    const int p = m.class_to_cluster[g];
    const std::int64_t tp = p >= 0 ? cm.at(p, g) : 0;
    const std::int64_t uni = gt_sum[g] + (p >= 0 ? pred_sum[p] : 0) - tp;
    correct += tp;
    if (uni == 0) continue;
    m.class_iou[g] = static_cast<double>(tp) / static_cast<double>(uni);
    iou_sum += m.class_iou[g];
    ++iou_count;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  m.miou = iou_count > 0 ? iou_sum / iou_count : 0.0;
  return m;
}

LabelGrid split_connected_components(const LabelGrid& instances, std::optional<int> background,
                                     std::optional<int> ignore) {
  LabelGrid out(instances.rows(), instances.cols(), kNoMask);
  std::int32_t next = 0;
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < instances.rows(); ++r)
    for (int c = 0; c < instances.cols(); ++c) {
      const int v = instances(r, c);
      if (ignore && v == *ignore) {
        out(r, c) = kIgnored;
        continue;
      }
      if ((background && v == *background) || out(r, c) != kNoMask) continue;
      const std::int32_t id = next++;
      out(r, c) = id;
      stack.assign(1, {r, c});
      while (!stack.empty()) {
        const auto [cr, cc] = stack.back();
        stack.pop_back();
        constexpr int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int nr = cr + dr[k], nc = cc + dc[k];
          if (!instances.contains(nr, nc) || out(nr, nc) != kNoMask || instances(nr, nc) != v) continue;
          out(nr, nc) = id;
          stack.push_back({nr, nc});
        }
      }
    }
  return out;
}

RegionScores region_scores(std::span<const LabelGrid> proposals, std::span<const LabelGrid> gt_components) {
  check_pair(proposals, gt_components, "region_scores");
  RegionScores s;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto& prop = proposals[i];
    const auto& gt = gt_components[i];
    // Dense ids for proposals present on non-ignored pixels.
    std::map<std::int32_t, int> prop_index;
    int num_gt = 0;
    for (std::size_t k = 0; k < prop.size(); ++k) {
      if (gt[k] == kIgnored) continue;
      if (prop[k] >= 0) prop_index.emplace(prop[k], 0);
      if (gt[k] < kNoMask) throw InputError("region_scores: invalid gt component id");
      num_gt = std::max(num_gt, gt[k] + 1);
    }
    int next = 0;
    for (auto& [id, idx] : prop_index) idx = next++;
    const int np = next;
    std::vector<std::int64_t> prop_area(np, 0), gt_area(num_gt, 0), overlap(static_cast<std::size_t>(np) * num_gt, 0);
    for (std::size_t k = 0; k < prop.size(); ++k) {
      if (gt[k] == kIgnored) continue;
      const int p = prop[k] >= 0 ? prop_index[prop[k]] : -1;
      if (p >= 0) ++prop_area[p];
      if (gt[k] >= 0) {
        ++gt_area[gt[k]];
        if (p >= 0) ++overlap[static_cast<std::size_t>(p) * num_gt + gt[k]];
      }
    }
    Eigen::MatrixXd iou = Eigen::MatrixXd::Zero(num_gt, np);
    for (int g = 0; g < num_gt; ++g)
      for (int p = 0; p < np; ++p) {
        const std::int64_t inter = overlap[static_cast<std::size_t>(p) * num_gt + g];
        if (inter > 0) iou(g, p) = static_cast<double>(inter) / static_cast<double>(gt_area[g] + prop_area[p] - inter);
      }
    const std::vector<int> match = np > 0 ? hungarian_max(iou) : std::vector<int>(num_gt, -1);
    for (int g = 0; g < num_gt; ++g) {
      if (gt_area[g] == 0) continue;  // component ids skipped by the caller
      s.gt_query_iou.push_back(np > 0 ? iou.row(g).maxCoeff() : 0.0);
      s.bilateral_iou.push_back(match[g] >= 0 ? iou(g, match[g]) : 0.0);
    }
  }
  s.num_gt_masks = static_cast<int>(s.gt_query_iou.size());
  if (s.num_gt_masks == 0) throw InputError("region_scores: no ground-truth masks");
  s.gt_query_miou = std::accumulate(s.gt_query_iou.begin(), s.gt_query_iou.end(), 0.0) / s.num_gt_masks;
  s.bilateral_miou = std::accumulate(s.bilateral_iou.begin(), s.bilateral_iou.end(), 0.0) / s.num_gt_masks;
  return s;
}

double gt_query_miou(std::span<const LabelGrid> proposals, std::span<const LabelGrid> gt_components) {
  return region_scores(proposals, gt_components).gt_query_miou;
}

double bilateral_match_miou(std::span<const LabelGrid> proposals, std::span<const LabelGrid> gt_components) {
  return region_scores(proposals, gt_components).bilateral_miou;
}

std::string matched_metrics_to_json(const MatchedMetrics& m) {
  nlohmann::json j;
  j["accuracy"] = m.accuracy;
  j["miou"] = m.miou;
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < m.class_iou.size(); ++c) {
    per.push_back({{"class", c},
                   {"cluster", m.class_to_cluster[c]},
                   {"iou", std::isnan(m.class_iou[c]) ? nlohmann::json(nullptr) : nlohmann::json(m.class_iou[c])}});
  }
  j["classes"] = std::move(per);
  j["num_clusters"] = m.confusion.num_pred;
  j["pixels"] = m.confusion.total();
  return j.dump(1) + "\n";
}

std::string region_scores_to_json(const RegionScores& s) {
  nlohmann::json j;
  j["gt_query_miou"] = s.gt_query_miou;
  j["bilateral_miou"] = s.bilateral_miou;
  j["num_gt_masks"] = s.num_gt_masks;
  j["gt_query_iou"] = s.gt_query_iou;
  j["bilateral_iou"] = s.bilateral_iou;
  return j.dump(1) + "\n";
}

}  // namespace depthgroup
