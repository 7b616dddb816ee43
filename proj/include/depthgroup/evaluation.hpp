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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "depthgroup/grid.hpp"

namespace depthgroup {

/// Minimum-cost assignment on a rectangular cost matrix. Returns, for each row, its column or -1
/// (rows outnumbering columns stay unassigned). Every column/row of the smaller side is matched.
std::vector<int> hungarian_min(const Eigen::MatrixXd& cost);

/// Maximum-weight counterpart of hungarian_min.
std::vector<int> hungarian_max(const Eigen::MatrixXd& weight);

struct ConfusionMatrix {
  int num_pred = 0;
  int num_gt = 0;
  std::vector<std::int64_t> counts;  // num_pred × num_gt, row-major

  std::int64_t& at(int p, int g) { return counts[static_cast<std::size_t>(p) * num_gt + g]; }
  std::int64_t at(int p, int g) const { return counts[static_cast<std::size_t>(p) * num_gt + g]; }
  std::int64_t total() const;
};

/// Counts (prediction, ground truth) pixel pairs; pixels whose gt equals `ignore_value` are skipped.
ConfusionMatrix confusion_matrix(std::span<const LabelGrid> pred, std::span<const LabelGrid> gt, int num_classes,
                                 int ignore_value = 255);

struct MatchedMetrics {
  double accuracy = 0.0;
  double miou = 0.0;
  std::vector<double> class_iou;    // NaN where the class has an empty union
  std::vector<int> class_to_cluster;  // -1 when unmatched
  ConfusionMatrix confusion;
};

/// Hungarian cluster -> class matching that maximizes matched pixels, then accuracy and mean IoU.
MatchedMetrics matched_metrics(std::span<const LabelGrid> pred, std::span<const LabelGrid> gt, int num_classes,
                               int ignore_value = 255);

constexpr std::int32_t kNoMask = -1;
constexpr std::int32_t kIgnored = -2;

/// Splits every instance id into 4-connected components numbered 0.. in scan order. Pixels equal to
/// `background` become kNoMask, pixels equal to `ignore` become kIgnored.
LabelGrid split_connected_components(const LabelGrid& instances, std::optional<int> background = std::nullopt,
                                     std::optional<int> ignore = std::nullopt);

struct RegionScores {
  double gt_query_miou = 0.0;
  double bilateral_miou = 0.0;
  int num_gt_masks = 0;
  std::vector<double> gt_query_iou;  // per GT mask, pooled over images in order
  std::vector<double> bilateral_iou;
};

/// Proposals: region id per pixel (kNoMask = none). GT: component id per pixel from
/// split_connected_components. kIgnored pixels are left out of every area. Scores are pooled over all
/// GT masks of all images; matching happens within each image.
RegionScores region_scores(std::span<const LabelGrid> proposals, std::span<const LabelGrid> gt_components);

double gt_query_miou(std::span<const LabelGrid> proposals, std::span<const LabelGrid> gt_components);
double bilateral_match_miou(std::span<const LabelGrid> proposals, std::span<const LabelGrid> gt_components);

std::string matched_metrics_to_json(const MatchedMetrics& m);
std::string region_scores_to_json(const RegionScores& s);

}  // namespace depthgroup
