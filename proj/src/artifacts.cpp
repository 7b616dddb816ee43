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

#include "depthgroup/artifacts.hpp"

#include <cstdio>
#include <set>

#include "depthgroup/io.hpp"

namespace depthgroup {
namespace {

using nlohmann::json;

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string numbered(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d%s", stem, i, ext);
  return buf;
}

json affine_json(const Affine& a) { return a.coefficients(); }

Affine affine_from(const json& j) {
  const auto c = j.get<std::array<double, 6>>();
  return {c[0], c[1], c[2], c[3], c[4], c[5]};
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

DepthFrame Manifest::load_frame(std::size_t i) const {
  const auto& f = frames.at(i);
  return io::load_frame(f.frame_id, f.rgb, f.depth, f.intrinsics);
}

std::string Manifest::content_hash() const {
  std::uint64_t h = fnv1a64("frames");
  auto add_file = [&](const fs::path& p) {
    h = fnv1a64(p.filename().string(), h);
    h = fnv1a64(io::read_text(p), h);
  };
  for (const auto& f : frames) {
    h = fnv1a64(f.frame_id, h);
    add_file(f.rgb);
    add_file(f.depth);
    if (f.depth.extension() == ".png" && fs::exists(io::depth_sidecar_path(f.depth))) {
      add_file(io::depth_sidecar_path(f.depth));
    }
    for (const auto* opt : {&f.intrinsics, &f.gt_instances, &f.gt_semantic})
      if (*opt) add_file(**opt);
  }
  return hex64(h);
}

Manifest load_manifest(const fs::path& path) {
  Manifest m;
  m.path = path;
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw InputError("manifest " + path.string() + ": " + e.what());
  }
  try {
    m.root = resolve(path.parent_path(), j.value("root", std::string(".")));
    if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("config")) m.config = j.at("config");
    std::set<std::string> ids;
    for (const auto& e : j.at("frames")) {
      FrameEntry f;
      f.frame_id = e.at("frame_id").get<std::string>();
      if (f.frame_id.empty() || f.frame_id.find_first_of("/\\") != std::string::npos || f.frame_id[0] == '.') {
        throw InputError("manifest: invalid frame_id '" + f.frame_id + "'");
      }
      if (!ids.insert(f.frame_id).second) throw InputError("manifest: duplicate frame_id '" + f.frame_id + "'");
      f.rgb = resolve(m.root, e.at("rgb").get<std::string>());
      f.depth = resolve(m.root, e.at("depth").get<std::string>());
      if (e.contains("intrinsics")) f.intrinsics = resolve(m.root, e.at("intrinsics").get<std::string>());
      if (e.contains("gt_instances")) f.gt_instances = resolve(m.root, e.at("gt_instances").get<std::string>());
      if (e.contains("gt_semantic")) f.gt_semantic = resolve(m.root, e.at("gt_semantic").get<std::string>());
      for (const auto* p : {&f.rgb, &f.depth})
        if (!fs::exists(*p)) throw InputError("manifest: missing file " + p->string());
      for (const auto* opt : {&f.intrinsics, &f.gt_instances, &f.gt_semantic})
        if (*opt && !fs::exists(**opt)) throw InputError("manifest: missing file " + (*opt)->string());
      m.frames.push_back(std::move(f));
    }
  } catch (const json::exception& e) {
    throw InputError("manifest " + path.string() + ": " + e.what());
  }
  if (m.frames.empty()) throw InputError("manifest: no frames");
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  const fs::path base = path.parent_path();
  auto rel = [&](const fs::path& p) { return fs::relative(p, base.empty() ? fs::path(".") : base).generic_string(); };
  json frames = json::array();
  for (const auto& f : manifest.frames) {
    json e{{"frame_id", f.frame_id}, {"rgb", rel(f.rgb)}, {"depth", rel(f.depth)}};
    if (f.intrinsics) e["intrinsics"] = rel(*f.intrinsics);
    if (f.gt_instances) e["gt_instances"] = rel(*f.gt_instances);
    if (f.gt_semantic) e["gt_semantic"] = rel(*f.gt_semantic);
    frames.push_back(std::move(e));
  }
  json j{{"root", "."}, {"frames", std::move(frames)}, {"config", manifest.config}};
  if (manifest.seed) j["seed"] = *manifest.seed;
  io::write_text(path, j.dump(2) + "\n");
}

std::string Stamp::hash() const {
  return hex64(fnv1a64(json{{"stage", stage}, {"params", params}, {"upstream", upstream}}.dump()));
}

json Stamp::to_json() const { return {{"stage", stage}, {"params", params}, {"upstream", upstream}, {"hash", hash()}}; }

Stamp Stamp::from_json(const json& j) {
  Stamp s;
  s.stage = j.at("stage").get<std::string>();
  s.params = j.at("params");
  s.upstream = j.at("upstream").get<std::map<std::string, std::string>>();
  if (j.at("hash").get<std::string>() != s.hash()) throw StaleArtifactError("stamp for stage '" + s.stage + "' was edited");
  return s;
}

void write_stamp(const fs::path& stage_dir, const Stamp& stamp) {
  io::write_text(stage_dir / "stamp.json", stamp.to_json().dump(2) + "\n");
}

std::optional<Stamp> read_stamp(const fs::path& stage_dir) {
  const fs::path p = stage_dir / "stamp.json";
  if (!fs::exists(p)) return std::nullopt;
  try {
    return Stamp::from_json(json::parse(io::read_text(p)));
  } catch (const json::exception& e) {
    throw InputError("stamp " + p.string() + ": " + e.what());
  }
}

void save_sample(const fs::path& dir, const SyntheticSample& s) {
  fs::create_directories(dir);
  json records = json::array();
  for (const auto& r : s.records) {
    records.push_back({{"target_image", r.target_image},
                       {"source_index", r.source_index},
                       {"source_frame_id", r.source_frame_id},
                       {"region_id", r.region_id},
                       {"instance_id", r.instance_id},
                       {"affine", affine_json(r.affine)},
                       {"paste_affine", affine_json(r.paste_affine)},
                       {"scale", r.scale},
                       {"flipped", r.flipped},
                       {"jitter", {r.jitter.brightness, r.jitter.contrast, r.jitter.saturation}},
                       {"position_height", r.position_height},
                       {"placed_x", r.placed_x},
                       {"placed_y", r.placed_y}});
  }
  json bg = json::array();
  for (const auto& a : s.background_transforms) bg.push_back(affine_json(a));
  json files = json::array();
  for (int i = 0; i < static_cast<int>(s.images.size()); ++i) {
    files.push_back({{"image", numbered("image", i, ".png")},
                     {"depth", numbered("depth", i, ".png")},
                     {"region_ids", numbered("region", i, ".png")},
                     {"instance_ids", numbered("instance", i, ".png")}});
  }
  json j{{"source_frame_ids", s.source_frame_ids},
         {"num_images", s.images.size()},
         {"files", std::move(files)},
         {"background_index", s.background_index},
         {"background_transforms", std::move(bg)},
         {"records", std::move(records)}};
  io::write_text(dir / "sample.json", j.dump(1) + "\n");
  for (int i = 0; i < static_cast<int>(s.images.size()); ++i) {
    io::write_rgb(dir / numbered("image", i, ".png"), s.images[i]);
    io::write_depth_png(dir / numbered("depth", i, ".png"), s.depths[i]);
    io::write_label_png(dir / numbered("region", i, ".png"), s.region_id_maps[i]);
    io::write_label_png(dir / numbered("instance", i, ".png"), s.instance_id_maps[i]);
  }
}

SyntheticSample load_sample(const fs::path& dir) {
  SyntheticSample s;
  try {
    const json j = json::parse(io::read_text(dir / "sample.json"));
    s.source_frame_ids = j.at("source_frame_ids").get<std::vector<std::string>>();
    s.background_index = j.at("background_index").get<std::vector<int>>();
    for (const auto& a : j.at("background_transforms")) s.background_transforms.push_back(affine_from(a));
    for (const auto& e : j.at("records")) {
      TransformRecord r;
      r.target_image = e.at("target_image").get<int>();
      r.source_index = e.at("source_index").get<int>();
      r.source_frame_id = e.at("source_frame_id").get<std::string>();
      r.region_id = e.at("region_id").get<int>();
      r.instance_id = e.at("instance_id").get<int>();
      r.affine = affine_from(e.at("affine"));
      r.paste_affine = affine_from(e.at("paste_affine"));
      r.scale = e.at("scale").get<double>();
      r.flipped = e.at("flipped").get<bool>();
      const auto jit = e.at("jitter").get<std::array<double, 3>>();
      r.jitter = {jit[0], jit[1], jit[2]};
      r.position_height = e.at("position_height").get<int>();
      r.placed_x = e.at("placed_x").get<int>();
      r.placed_y = e.at("placed_y").get<int>();
      if (r.instance_id != static_cast<int>(s.records.size()) + 1) throw InputError("sample: instance ids out of order");
      s.records.push_back(std::move(r));
    }
    const int n = j.at("num_images").get<int>();
    for (int i = 0; i < n; ++i) {
      s.images.push_back(io::read_rgb(dir / numbered("image", i, ".png")));
      s.depths.push_back(io::read_depth(dir / numbered("depth", i, ".png")).depth);
      s.region_id_maps.push_back(io::read_label_png(dir / numbered("region", i, ".png")));
      s.instance_id_maps.push_back(io::read_label_png(dir / numbered("instance", i, ".png")));
    }
  } catch (const json::exception& e) {
    throw InputError("sample " + dir.string() + ": " + e.what());
  }
  for (auto& r : s.records) {
    const auto& inst = s.instance_id_maps.at(r.target_image);
    r.visibility_mask = Mask(inst.rows(), inst.cols(), 0);
    for (std::size_t k = 0; k < inst.size(); ++k)
      if (inst[k] == r.instance_id) r.visibility_mask[k] = 1;
  }
  return s;
}

}  // namespace depthgroup
