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
#include <filesystem>
#include <tuple>
#include <map>
#include <set>

#include <doctest.h>

#include "depthgroup/grouping.hpp"
#include "depthgroup/sampling.hpp"
#include "depthgroup/scene.hpp"
#include "oracles.hpp"

using namespace depthgroup;

namespace {

struct Fixture {
  std::vector<DepthFrame> frames;
  std::vector<RegionMap> regions;
  SyntheticSample sample;
};

Fixture make_fixture(int m, std::array<double, 2> e, std::uint64_t seed, bool augment = false) {
  Fixture fx;
  for (int i = 0; i < m; ++i) {
    const Scene s = render_scene(random_scene_config(seed + i, 64, 96), "f" + std::to_string(i), seed + i);
    GroupingConfig cfg;
    cfg.slic.target_count = 64 * 96 / 16;
    cfg.seed = seed;
    fx.regions.push_back(group_frame(s.frame, cfg).regions);
    fx.frames.push_back(s.frame);
  }
  PasteConfig cfg;
  cfg.num_images = m;
  cfg.expectations = e;
  cfg.image_augment = augment;
  fx.sample = synthesize(fx.frames, fx.regions, cfg, seed);
  return fx;
}

// Source identity of every final pixel, derived from re-simulated instance maps.
using Identity = std::tuple<int, int, int>;
std::map<SampleCoord, Identity> oracle_identities(const Fixture& fx) {
  const auto inst = oracle::resimulate_instances(fx.sample, fx.frames, fx.regions);
  std::map<SampleCoord, Identity> out;
  for (int img = 0; img < static_cast<int>(inst.size()); ++img)
    for (int r = 0; r < inst[img].rows(); ++r)
      for (int c = 0; c < inst[img].cols(); ++c) {
        const int id = inst[img](r, c);
        Identity key;
        if (id == 0) {
          const Point2 p = fx.sample.background_transforms[img].inverse().apply(c, r);
          key = {fx.sample.background_index[img], std::clamp(round_pixel(p.y), 0, inst[img].rows() - 1),
                 std::clamp(round_pixel(p.x), 0, inst[img].cols() - 1)};
        } else {
          const auto& rec = fx.sample.records[id - 1];
          const Point2 p = rec.affine.inverse().apply(c, r);
          key = {rec.source_index, round_pixel(p.y), round_pixel(p.x)};
        }
        out[{img, r, c}] = key;
      }
  return out;
}

void check_disjoint(const GroupIndex& g) {
  std::set<SampleCoord> seen;
  for (const auto& grp : g.groups) {
    CHECK(grp.size() >= 2);
    for (const auto& c : grp) CHECK(seen.insert(c).second);
  }
}

}  // namespace

TEST_CASE("kind names") {
  CHECK(to_string(GroupKind::kRegion) == "region");
  CHECK(group_kind_from_string("pixel") == GroupKind::kPixel);
  CHECK_THROWS_AS(group_kind_from_string("voxel"), InputError);
}

TEST_CASE("duplicated backgrounds give pairs") {
  const Fixture fx = make_fixture(1, {0.0, 0.0}, 3);
  const GroupIndex g = pixel_groups(fx.sample, 1000, 1);
  CHECK(g.num_coords() == 1000);
  for (const auto& grp : g.groups) {
    REQUIRE(grp.size() == 2);
    CHECK(grp[0].row == grp[1].row);
    CHECK(grp[0].col == grp[1].col);
    CHECK(grp[0].image_index != grp[1].image_index);
  }
}

TEST_CASE("pixel groups collect every occurrence") {
  for (bool augment : {false, true}) {
    const Fixture fx = make_fixture(2, {1.0, 2.0}, 11, augment);
    const auto ids = oracle_identities(fx);
    std::map<Identity, int> occurrences;
    for (const auto& [coord, id] : ids) ++occurrences[id];

    const int budget = 4000;
    const GroupIndex g = pixel_groups(fx.sample, budget, 2);
    CHECK(g.kind == GroupKind::kPixel);
    CHECK(g.num_coords() <= static_cast<std::size_t>(budget));
    CHECK(g.num_coords() >= static_cast<std::size_t>(budget) - 1);
    check_disjoint(g);
    int triples = 0;
    for (std::size_t k = 0; k < g.groups.size(); ++k) {
      const auto& grp = g.groups[k];
      const Identity id = ids.at(grp[0]);
      for (const auto& c : grp) CHECK(ids.at(c) == id);
      // Only the last group may be cut short by the budget.
      if (k + 1 < g.groups.size()) CHECK(static_cast<int>(grp.size()) == occurrences.at(id));
      triples += grp.size() >= 3;
    }
    CHECK(triples > 0);
  }
}

TEST_CASE("region groups share a source region") {
  const Fixture fx = make_fixture(2, {1.0, 2.0}, 21);
  const auto inst = oracle::resimulate_instances(fx.sample, fx.frames, fx.regions);
  auto key = [&](const SampleCoord& c) -> std::pair<int, int> {
    const int id = inst[c.image_index](c.row, c.col);
    if (id == 0) {
      const Point2 p = fx.sample.background_transforms[c.image_index].inverse().apply(c.col, c.row);
      return {fx.sample.background_index[c.image_index],
              fx.regions[fx.sample.background_index[c.image_index]].labels(round_pixel(p.y), round_pixel(p.x))};
    }
    return {fx.sample.records[id - 1].source_index, fx.sample.records[id - 1].region_id};
  };
  const GroupIndex g = region_groups(fx.sample, 3000, 4);
  CHECK(g.kind == GroupKind::kRegion);
  CHECK(g.num_coords() <= 3000);
  check_disjoint(g);
  std::set<std::pair<int, int>> keys;
  bool pasted_and_background = false;
  for (const auto& grp : g.groups) {
    const auto k = key(grp[0]);
    CHECK(keys.insert(k).second);
    bool saw_bg = false, saw_paste = false;
    for (const auto& c : grp) {
      CHECK(key(c) == k);
      (inst[c.image_index](c.row, c.col) == 0 ? saw_bg : saw_paste) = true;
    }
    pasted_and_background |= saw_bg && saw_paste;
  }
  CHECK(pasted_and_background);
}

TEST_CASE("sampling is deterministic and validates its budget") {
  const Fixture fx = make_fixture(1, {1.0, 2.0}, 5);
  const GroupIndex a = pixel_groups(fx.sample, 500, 8), b = pixel_groups(fx.sample, 500, 8);
  CHECK(a.groups == b.groups);
  CHECK(region_groups(fx.sample, 500, 8).groups == region_groups(fx.sample, 500, 8).groups);
  CHECK_THROWS_AS(pixel_groups(fx.sample, 0, 1), InputError);
  CHECK_THROWS_AS(region_groups(fx.sample, 0, 1), InputError);
}

TEST_CASE("index validation") {
  GroupIndex g;
  g.groups = {{{0, 1, 1}, {1, 1, 1}}, {{0, 2, 2}}};
  CHECK_THROWS_AS(g.validate(), InputError);
  g.groups = {{{0, 1, 1}, {1, 1, 1}}, {{0, 1, 1}, {1, 2, 2}}};
  CHECK_THROWS_AS(g.validate(), InputError);
}

TEST_CASE("stride downsampling") {
  GroupIndex g;
  g.groups = {{{0, 0, 0}, {0, 1, 1}, {1, 8, 9}}, {{0, 3, 3}, {1, 4, 4}}, {{0, 9, 9}, {1, 13, 13}}};
  const GroupIndex d = downsample(g, 4);
  // (0,1,1) collapses onto (0,0,0). The second group loses (0,3,3) to the first and is left a singleton.
  REQUIRE(d.groups.size() == 2);
  CHECK(d.groups[0] == std::vector<SampleCoord>{{0, 0, 0}, {1, 2, 2}});
  CHECK(d.groups[1] == std::vector<SampleCoord>{{0, 2, 2}, {1, 3, 3}});
  check_disjoint(d);
  CHECK(downsample(g, 1).groups == g.groups);
  CHECK_THROWS_AS(downsample(g, 0), InputError);
}

TEST_CASE("row groups follow flat order") {
  GroupIndex g;
  g.groups = {{{0, 0, 0}, {1, 0, 0}, {1, 0, 1}}, {{0, 5, 5}, {1, 5, 5}}};
  CHECK(row_groups(g) == std::vector<std::vector<int>>{{0, 1, 2}, {3, 4}});
}

TEST_CASE("serialisation round trips") {
  const Fixture fx = make_fixture(1, {1.0, 2.0}, 9);
  const GroupIndex g = pixel_groups(fx.sample, 300, 3);
  const GroupIndex j = group_index_from_json(group_index_to_json(g));
  CHECK(j.kind == g.kind);
  CHECK(j.groups == g.groups);

  const auto path = std::filesystem::temp_directory_path() / "depthgroup_sampling_test.bin";
  write_group_table(path, g);
  CHECK(std::filesystem::file_size(path) == g.num_coords() * 16);
  const GroupIndex b = read_group_table(path, GroupKind::kPixel);
  CHECK(b.groups == g.groups);
  std::filesystem::remove(path);
}
