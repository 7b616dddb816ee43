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

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <doctest.h>

#include "depthgroup/evaluation.hpp"
#include "oracles.hpp"

using namespace depthgroup;

namespace {

LabelGrid grid(int rows, int cols, std::initializer_list<int> values) {
  LabelGrid g(rows, cols);
  std::copy(values.begin(), values.end(), g.data());
  return g;
}

// Pairwise IoU of proposal p vs GT mask g for one image, by direct pixel counting.
Eigen::MatrixXd iou_matrix(const LabelGrid& prop, const LabelGrid& gt, int num_prop, int num_gt) {
  Eigen::MatrixXd iou(num_prop, num_gt);
  for (int p = 0; p < num_prop; ++p)
    for (int g = 0; g < num_gt; ++g) {
      int inter = 0, uni = 0;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == kIgnored) continue;
        const bool a = prop[i] == p, b = gt[i] == g;
        inter += a && b;
        uni += a || b;
      }
      iou(p, g) = uni ? static_cast<double>(inter) / uni : 0.0;
    }
  return iou;
}

// Random proposal and GT layouts with up to `max_labels` labels each.
void random_pair(std::mt19937_64& rng, int max_labels, LabelGrid& prop, LabelGrid& gt, int& np, int& ng) {
  np = 1 + static_cast<int>(rng() % max_labels);
  ng = 1 + static_cast<int>(rng() % max_labels);
  prop = LabelGrid(6, 7);
  gt = LabelGrid(6, 7);
  for (auto& v : prop.values()) v = static_cast<int>(rng() % np);
  for (auto& v : gt.values()) v = static_cast<int>(rng() % ng);
  // Guarantee every GT label exists.
  for (int g = 0; g < ng; ++g) gt[g] = g;
  for (int p = 0; p < np; ++p) prop[p + ng] = p;
}

}  // namespace

TEST_CASE("hungarian agrees with brute force") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int t = 0; t < 300; ++t) {
    const int r = 1 + static_cast<int>(rng() % 7), c = 1 + static_cast<int>(rng() % 7);
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = u(rng);
    for (bool maximize : {false, true}) {
      const auto a = maximize ? hungarian_max(m) : hungarian_min(m);
      REQUIRE(static_cast<int>(a.size()) == r);
      double total = 0.0;
      int matched = 0;
      std::vector<int> used(c, 0);
      for (int i = 0; i < r; ++i)
        if (a[i] >= 0) {
          total += m(i, a[i]);
          ++matched;
          CHECK(used[a[i]]++ == 0);
        }
      CHECK(matched == std::min(r, c));
      CHECK(total == doctest::Approx(oracle::brute_force_assignment(m, maximize)).epsilon(1e-12));
    }
  }
}

TEST_CASE("matched metrics") {
  const LabelGrid gt = grid(2, 2, {0, 0, 1, 1});
  SUBCASE("identical") {
    const MatchedMetrics m = matched_metrics(std::span(&gt, 1), std::span(&gt, 1), 2);
    CHECK(m.accuracy == 1.0);
    CHECK(m.miou == 1.0);
  }
  SUBCASE("permuted clusters") {
    const LabelGrid pred = grid(2, 2, {5, 5, 2, 2});
    const MatchedMetrics m = matched_metrics(std::span(&pred, 1), std::span(&gt, 1), 2);
    CHECK(m.accuracy == 1.0);
    CHECK(m.miou == 1.0);
    CHECK(m.class_to_cluster == std::vector<int>{5, 2});
  }
  SUBCASE("toy") {
    const LabelGrid pred = grid(2, 2, {0, 1, 1, 1});
    const MatchedMetrics m = matched_metrics(std::span(&pred, 1), std::span(&gt, 1), 2);
    CHECK(m.accuracy == 0.75);
    CHECK(m.class_iou[0] == doctest::Approx(0.5));
    CHECK(m.class_iou[1] == doctest::Approx(2.0 / 3.0));
    CHECK(std::abs(m.miou - 7.0 / 12.0) < 1e-9);
  }
  SUBCASE("ignored pixels") {
    const LabelGrid g2 = grid(2, 2, {0, 255, 1, 1});
    const LabelGrid pred = grid(2, 2, {0, 1, 1, 1});
    const MatchedMetrics m = matched_metrics(std::span(&pred, 1), std::span(&g2, 1), 2);
    CHECK(m.confusion.total() == 3);
    CHECK(m.accuracy == 1.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(matched_metrics(std::span<const LabelGrid>(), std::span<const LabelGrid>(), 2), InputError);
    const LabelGrid bad = grid(2, 2, {0, 0, 3, 1});
    CHECK_THROWS_AS(matched_metrics(std::span(&gt, 1), std::span(&bad, 1), 2), InputError);
  }
  SUBCASE("relabel invariance") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 50; ++t) {
      // Noisy copies of the GT keep the optimal matching unique; accuracy is invariant even under ties.
      LabelGrid p(32, 32), g(32, 32);
      for (auto& v : g.values()) v = static_cast<int>(rng() % 4);
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = rng() % 10 < 7 ? g[i] : static_cast<int>(rng() % 5);
      std::vector<int> perm(5);
      std::iota(perm.begin(), perm.end(), 10);
      std::shuffle(perm.begin(), perm.end(), rng);
      LabelGrid q = p;
      for (auto& v : q.values()) v = perm[v];
      const MatchedMetrics a = matched_metrics(std::span(&p, 1), std::span(&g, 1), 4);
      const MatchedMetrics b = matched_metrics(std::span(&q, 1), std::span(&g, 1), 4);
      CHECK(a.accuracy == b.accuracy);
      for (int k = 0; k < 4; ++k) CHECK(perm[a.class_to_cluster[k]] == b.class_to_cluster[k]);
      CHECK(a.miou == doctest::Approx(b.miou).epsilon(1e-12));
    }
  }
}

TEST_CASE("connected component split") {
  const LabelGrid inst = grid(3, 4, {1, 1, 0, 1,  //
                                     0, 0, 0, 1,  //
                                     2, 9, 2, 2});
  const LabelGrid c = split_connected_components(inst, 0, 9);
  CHECK(c == grid(3, 4, {0, 0, kNoMask, 1,  //
                         kNoMask, kNoMask, kNoMask, 1,  //
                         2, kIgnored, 3, 3}));
  const LabelGrid all = split_connected_components(inst);
  CHECK(*std::max_element(all.data(), all.data() + all.size()) == 5);
}

TEST_CASE("gt-query mIoU") {
  SUBCASE("proposals equal to the masks") {
    const LabelGrid g = grid(2, 3, {0, 0, 1, 2, 2, 1});
    CHECK(gt_query_miou(std::span(&g, 1), std::span(&g, 1)) == 1.0);
    CHECK(bilateral_match_miou(std::span(&g, 1), std::span(&g, 1)) == 1.0);
  }
  SUBCASE("single full-cover proposal") {
    const LabelGrid g = grid(3, 4, {0, 0, kNoMask, kNoMask, 0, 0, kNoMask, kNoMask, kNoMask, 1, 1, 1});
    const LabelGrid p(3, 4, 0);
    CHECK(gt_query_miou(std::span(&p, 1), std::span(&g, 1)) == doctest::Approx((4.0 / 12.0 + 3.0 / 12.0) / 2.0));
  }
  SUBCASE("no proposals") {
    const LabelGrid g = grid(1, 3, {0, 0, 1});
    const LabelGrid p(1, 3, kNoMask);
    const RegionScores s = region_scores(std::span(&p, 1), std::span(&g, 1));
    CHECK(s.gt_query_miou == 0.0);
    CHECK(s.bilateral_miou == 0.0);
    CHECK(s.num_gt_masks == 2);
  }
  SUBCASE("exhaustive oracle") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
      LabelGrid p, g;
      int np, ng;
      random_pair(rng, 6, p, g, np, ng);
      const Eigen::MatrixXd iou = iou_matrix(p, g, np, ng);
      double want = 0.0;
      for (int j = 0; j < ng; ++j) want += iou.col(j).maxCoeff();
      CHECK(gt_query_miou(std::span(&p, 1), std::span(&g, 1)) == doctest::Approx(want / ng).epsilon(1e-12));
    }
  }
}

TEST_CASE("bilateral match mIoU") {
  SUBCASE("greedy and optimal differ") {
    // Greedy would give GT 0 to proposal 1 (IoU 0.6), leaving GT 1 with 0.2.
    const LabelGrid g = grid(1, 10, {0, 0, 0, 0, 0, 0, 1, 1, 1, 1});
    const LabelGrid p = grid(1, 10, {0, 0, 0, 1, 1, 1, 1, 2, 2, 2});
    const Eigen::MatrixXd iou = iou_matrix(p, g, 3, 2);
    const double optimum = oracle::brute_force_assignment(iou, true) / 2.0;
    CHECK(bilateral_match_miou(std::span(&p, 1), std::span(&g, 1)) == doctest::Approx(optimum).epsilon(1e-12));
  }
  SUBCASE("random instances against injections") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 200; ++t) {
      LabelGrid p, g;
      int np, ng;
      random_pair(rng, 5, p, g, np, ng);
      const double want = oracle::brute_force_assignment(iou_matrix(p, g, np, ng), true) / ng;
      const double got = bilateral_match_miou(std::span(&p, 1), std::span(&g, 1));
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
      CHECK(got <= gt_query_miou(std::span(&p, 1), std::span(&g, 1)) + 1e-12);
    }
  }
  SUBCASE("fragmentation is penalised") {
    LabelGrid g(8, 8, 0);
    for (int r = 0; r < 8; ++r)
      for (int c = 4; c < 8; ++c) g(r, c) = 1;
    LabelGrid p(8, 8);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) p(r, c) = (r / 2) * 4 + c / 2;
    const double query = gt_query_miou(std::span(&p, 1), std::span(&g, 1));
    const double bilateral = bilateral_match_miou(std::span(&p, 1), std::span(&g, 1));
    CHECK(bilateral <= query);
    CHECK(query == doctest::Approx(4.0 / 32.0));
  }
  SUBCASE("pooled over images") {
    const LabelGrid g1 = grid(1, 2, {0, 0}), g2 = grid(1, 2, {0, 1});
    const LabelGrid p1 = grid(1, 2, {0, 0}), p2 = grid(1, 2, {0, 0});
    const std::vector<LabelGrid> p{p1, p2}, g{g1, g2};
    const RegionScores s = region_scores(p, g);
    CHECK(s.num_gt_masks == 3);
    CHECK(s.gt_query_miou == doctest::Approx((1.0 + 0.5 + 0.5) / 3.0));
    CHECK(s.bilateral_miou == doctest::Approx((1.0 + 0.5 + 0.0) / 3.0));
  }
}
