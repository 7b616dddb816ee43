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
#include <functional>
#include <map>

#include <doctest.h>

#include "depthgroup/grouping.hpp"
#include "depthgroup/scene.hpp"
#include "depthgroup/synthesis.hpp"
#include "oracles.hpp"

using namespace depthgroup;

namespace {

DepthFrame flat_frame(const std::string& id, int rows, int cols, double depth, Rgb color = {50, 60, 70}) {
  DepthFrame f;
  f.frame_id = id;
  f.intrinsics = {100.0, 100.0, cols / 2.0, rows / 2.0, cols, rows};
  f.rgb = RgbImage(rows, cols, color);
  f.depth = DepthGrid(rows, cols, depth);
  return f;
}

// Labels from a per-pixel function, with region metadata recomputed.
RegionMap regions_of(const DepthFrame& f, const std::function<int(int, int)>& label) {
  LabelGrid l(f.rows(), f.cols());
  for (int r = 0; r < f.rows(); ++r)
    for (int c = 0; c < f.cols(); ++c) l(r, c) = label(r, c);
  return region_map_from_labels(std::move(l), f.depth);
}

struct Fixture {
  std::vector<DepthFrame> frames;
  std::vector<RegionMap> regions;
};

Fixture grouped_scenes(int count, std::uint64_t seed) {
  Fixture fx;
  for (int i = 0; i < count; ++i) {
    const Scene s = render_scene(random_scene_config(seed + i, 96, 160), "scene" + std::to_string(i), seed + i);
    GroupingConfig cfg;
    cfg.slic.target_count = 96 * 160 / 16;
    cfg.seed = seed + i;
    fx.regions.push_back(group_frame(s.frame, cfg).regions);
    fx.frames.push_back(s.frame);
  }
  return fx;
}

std::map<int, int> pastes_per_image(const SyntheticSample& s) {
  std::map<int, int> n;
  for (const auto& r : s.records) ++n[r.target_image];
  return n;
}

void check_sample_invariants(const SyntheticSample& s, const Fixture& fx, const PasteConfig& cfg) {
  const auto resim = oracle::resimulate_instances(s, fx.frames, fx.regions);
  REQUIRE(resim.size() == s.instance_id_maps.size());
  for (std::size_t i = 0; i < resim.size(); ++i) CHECK(resim[i] == s.instance_id_maps[i]);

  for (const auto& rec : s.records) {
    CHECK(rec.affine.invertible());
    CHECK(std::abs(rec.placed_y - rec.position_height) <= cfg.height_threshold);
    const LabelGrid& inst = s.instance_id_maps[rec.target_image];
    const RegionMap& src_regions = fx.regions[rec.source_index];
    const DepthFrame& src = fx.frames[rec.source_index];
    const Affine inv = rec.affine.inverse();
    for (int r = 0; r < inst.rows(); ++r)
      for (int c = 0; c < inst.cols(); ++c) {
        const bool visible = rec.visibility_mask(r, c) != 0;
        CHECK(visible == (inst(r, c) == rec.instance_id));
        if (!visible) continue;
        const Point2 p = inv.apply(c, r);
        const int sr = round_pixel(p.y), sc = round_pixel(p.x);
        REQUIRE(src_regions.labels.contains(sr, sc));
        CHECK(src_regions.labels(sr, sc) == rec.region_id);
        CHECK(s.depths[rec.target_image](r, c) == src.depth(sr, sc) / rec.scale);
        CHECK(s.region_id_maps[rec.target_image](r, c) == rec.region_id);
        CHECK(trace_source(s, rec.target_image, r, c) == SourcePixel{rec.source_index, sr, sc});
      }
  }
}

}  // namespace

TEST_CASE("paste config validation") {
  PasteConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.num_images = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = {};
  cfg.expectations = {-1.0, 2.0};
  CHECK_THROWS_AS(cfg.validate(), InputError);
}

TEST_CASE("region size thresholds are inclusive") {
  const DepthFrame f = flat_frame("f", 40, 40, 5.0);
  const RegionMap m = regions_of(f, [](int r, int c) {
    if (r >= 2 && r < 17 && c >= 2 && c < 12) return 1;   // 15 x 10
    if (r >= 20 && r < 36 && c >= 20 && c < 26) return 2;  // 16 x 6
    return 0;
  });
  const auto pool = extract_regions(std::span(&f, 1), std::span(&m, 1), PasteConfig{});
  std::vector<int> ids;
  for (const auto& p : pool) ids.push_back(p.region_id);
  CHECK(ids == std::vector<int>{0, 2});
  const RegionPatch& p2 = pool[1];
  CHECK(p2.bbox.height() == 16);
  CHECK(p2.bbox.width() == 6);
  CHECK(p2.position_height == 20);
  CHECK(p2.mask.rows() == 16);
  CHECK(p2.covers(20, 20));
  CHECK_FALSE(p2.covers(19, 20));

  const RegionMap whole = regions_of(f, [](int, int) { return 0; });
  CHECK(extract_regions(std::span(&f, 1), std::span(&whole, 1), PasteConfig{}).size() == 1);
}

TEST_CASE("depthmix composite") {
  const DepthFrame src = flat_frame("s", 20, 20, 5.0, {255, 0, 0});
  const RegionMap all = regions_of(src, [](int r, int c) { return (r >= 4 && r < 12 && c >= 4 && c < 12) ? 1 : 0; });
  PasteConfig cfg;
  cfg.min_height = 1;
  cfg.min_width = 1;
  const auto pool = extract_regions(std::span(&src, 1), std::span(&all, 1), cfg);
  const RegionPatch& box = pool[1];
  const Affine place = Affine::translation(10, 10) * Affine::translation(-box.bbox.left, -box.bbox.top);

  SUBCASE("nearer region is fully visible") {
    const DepthFrame bg = flat_frame("b", 30, 30, 10.0);
    const CompositeResult r = depthmix_composite(bg.rgb, bg.depth, box, place);
    int visible = 0;
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 30; ++x) {
        const bool inside = y >= 10 && y < 18 && x >= 10 && x < 18;
        CHECK((r.visible(y, x) != 0) == inside);
        visible += r.visible(y, x) != 0;
        CHECK(r.depth(y, x) == (inside ? 5.0 : 10.0));
        CHECK(r.rgb(y, x) == (inside ? Rgb{255, 0, 0} : bg.rgb(y, x)));
      }
    CHECK(visible == 64);
  }
  SUBCASE("farther region is hidden") {
    const DepthFrame bg = flat_frame("b", 30, 30, 3.0);
    const CompositeResult r = depthmix_composite(bg.rgb, bg.depth, box, place);
    CHECK(r.rgb == bg.rgb);
    CHECK(r.depth == bg.depth);
    for (auto v : r.visible.values()) CHECK(v == 0);
  }
  SUBCASE("equal depth does not overwrite") {
    const DepthFrame bg = flat_frame("b", 30, 30, 5.0);
    const CompositeResult r = depthmix_composite(bg.rgb, bg.depth, box, place);
    for (auto v : r.visible.values()) CHECK(v == 0);
  }
  SUBCASE("straddling a depth edge") {
    DepthFrame bg = flat_frame("b", 30, 30, 10.0);
    for (int y = 0; y < 30; ++y)
      for (int x = 14; x < 30; ++x) bg.depth(y, x) = 3.0;
    const CompositeResult r = depthmix_composite(bg.rgb, bg.depth, box, place);
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 30; ++x) {
        const bool want = y >= 10 && y < 18 && x >= 10 && x < 18 && bg.depth(y, x) > 5.0;
        CHECK((r.visible(y, x) != 0) == want);
      }
  }
  SUBCASE("clipped at the border and depth divisor") {
    const DepthFrame bg = flat_frame("b", 30, 30, 3.0);
    const Affine edge = Affine::translation(26, -4) * Affine::translation(-box.bbox.left, -box.bbox.top);
    const CompositeResult r = depthmix_composite(bg.rgb, bg.depth, box, edge, 2.0);
    int visible = 0;
    for (int y = 0; y < 30; ++y)
      for (int x = 0; x < 30; ++x)
        if (r.visible(y, x)) {
          ++visible;
          CHECK(r.depth(y, x) == 2.5);
        }
    CHECK(visible == 4 * 4);
  }
}

TEST_CASE("zero expectations duplicate the backgrounds") {
  const Fixture fx = grouped_scenes(2, 100);
  PasteConfig cfg;
  cfg.num_images = 2;
  cfg.expectations = {0.0, 0.0};
  const SyntheticSample s = synthesize(fx.frames, fx.regions, cfg, 5);
  REQUIRE(s.images.size() == 4);
  CHECK(s.records.empty());
  for (int i = 0; i < 4; ++i) {
    CHECK(s.images[i] == fx.frames[i % 2].rgb);
    CHECK(s.depths[i] == fx.frames[i % 2].depth);
    CHECK(s.region_id_maps[i] == fx.regions[i % 2].labels);
    CHECK(s.background_index[i] == i % 2);
  }
}

TEST_CASE("paste counts follow the expectations") {
  std::vector<DepthFrame> frames{flat_frame("a", 40, 40, 5.0), flat_frame("b", 40, 40, 6.0)};
  std::vector<RegionMap> regions;
  for (const auto& f : frames) regions.push_back(regions_of(f, [](int, int c) { return c < 20 ? 0 : 1; }));
  PasteConfig cfg;
  cfg.num_images = 2;
  const SyntheticSample s = synthesize(frames, regions, cfg, 1);
  const auto n = pastes_per_image(s);
  CHECK(n.at(0) == 2);
  CHECK(n.at(1) == 2);
  CHECK(n.at(2) == 4);
  CHECK(n.at(3) == 4);
  for (std::size_t k = 0; k < s.records.size(); ++k) CHECK(s.records[k].instance_id == static_cast<int>(k) + 1);
}

TEST_CASE("synthesis rejects bad calls") {
  const Fixture fx = grouped_scenes(2, 7);
  PasteConfig cfg;
  cfg.num_images = 2;
  CHECK_THROWS_AS(synthesize(fx.frames, fx.regions, cfg, std::nullopt), InputError);
  cfg.num_images = 3;
  CHECK_THROWS_AS(synthesize(fx.frames, fx.regions, cfg, 1), InputError);
}

TEST_CASE("empty pool gives unmodified backgrounds") {
  std::vector<DepthFrame> frames{flat_frame("a", 10, 10, 5.0)};
  std::vector<RegionMap> regions{regions_of(frames[0], [](int, int) { return 0; })};
  PasteConfig cfg;
  cfg.num_images = 1;
  const SyntheticSample s = synthesize(frames, regions, cfg, 1);
  CHECK(s.records.empty());
  CHECK(s.images.size() == 2);
}

TEST_CASE("recorded transforms reproduce the sample") {
  const Fixture fx = grouped_scenes(3, 40);
  PasteConfig cfg;
  cfg.num_images = 3;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const SyntheticSample s = synthesize(fx.frames, fx.regions, cfg, seed);
    CHECK_FALSE(s.records.empty());
    check_sample_invariants(s, fx, cfg);
  }
}

TEST_CASE("whole-image augmentation keeps correspondences exact") {
  const Fixture fx = grouped_scenes(2, 60);
  PasteConfig cfg;
  cfg.num_images = 2;
  cfg.image_augment = true;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const SyntheticSample s = synthesize(fx.frames, fx.regions, cfg, seed);
    check_sample_invariants(s, fx, cfg);
    for (const auto& rec : s.records) CHECK(rec.affine == s.background_transforms[rec.target_image] * rec.paste_affine);
  }
}

TEST_CASE("synthesis is deterministic") {
  const Fixture fx = grouped_scenes(2, 80);
  PasteConfig cfg;
  cfg.num_images = 2;
  cfg.image_augment = true;
  const SyntheticSample a = synthesize(fx.frames, fx.regions, cfg, 9), b = synthesize(fx.frames, fx.regions, cfg, 9);
  CHECK(a.images == b.images);
  CHECK(a.depths == b.depths);
  CHECK(a.instance_id_maps == b.instance_id_maps);
  CHECK(a.region_id_maps == b.region_id_maps);
  CHECK(a.background_transforms == b.background_transforms);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].affine == b.records[k].affine);
    CHECK(a.records[k].visibility_mask == b.records[k].visibility_mask);
  }
  const SyntheticSample c = synthesize(fx.frames, fx.regions, cfg, 10);
  CHECK(c.images != a.images);
}
