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

#include "depthgroup/sampling.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <cstring>

#include <nlohmann/json.hpp>

#include "depthgroup/log.hpp"

namespace depthgroup {
namespace {

std::uint64_t pack(int a, int b, int c) {
  return (static_cast<std::uint64_t>(a) << 44) | (static_cast<std::uint64_t>(b) << 22) | static_cast<std::uint64_t>(c);
}

void check_budget(int budget) {
  if (budget < 1) throw InputError("sampling: budget must be >= 1");
}

}  // namespace

std::string to_string(GroupKind kind) { return kind == GroupKind::kPixel ? "pixel" : "region"; }

GroupKind group_kind_from_string(const std::string& s) {
  if (s == "pixel") return GroupKind::kPixel;
  if (s == "region") return GroupKind::kRegion;
  throw InputError("unknown group kind '" + s + "'");
}

std::size_t GroupIndex::num_coords() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

void GroupIndex::validate() const {
  std::set<SampleCoord> seen;
  for (const auto& g : groups) {
    if (g.size() < 2) throw InputError("group index: group with fewer than 2 members");
    for (const auto& c : g)
      if (!seen.insert(c).second) throw InputError("group index: coordinate appears in two groups");
  }
}

GroupIndex pixel_groups(const SyntheticSample& sample, int budget, std::uint64_t seed) {
  check_budget(budget);
  // (identity key, coordinate) for every final pixel, sorted so equal identities are contiguous.
  std::vector<std::pair<std::uint64_t, SampleCoord>> occ;
  for (int i = 0; i < static_cast<int>(sample.images.size()); ++i) {
    const auto& img = sample.images[i];
    for (int r = 0; r < img.rows(); ++r)
      for (int c = 0; c < img.cols(); ++c) {
        const SourcePixel s = trace_source(sample, i, r, c);
        occ.push_back({pack(s.source_index, s.row, s.col), {i, r, c}});
      }
  }
  std::sort(occ.begin(), occ.end());
  std::vector<std::vector<SampleCoord>> identities;
  for (std::size_t a = 0; a < occ.size();) {
    std::size_t b = a;
    while (b < occ.size() && occ[b].first == occ[a].first) ++b;
    if (b - a >= 2) {
      std::vector<SampleCoord> g;
      for (std::size_t k = a; k < b; ++k) g.push_back(occ[k].second);
      identities.push_back(std::move(g));
    }
    a = b;
  }
  GroupIndex out;
  out.kind = GroupKind::kPixel;
  if (identities.empty()) {
    log::warn("pixel_groups: no source pixel occurs more than once; empty group index");
    return out;
  }
  std::mt19937_64 rng(seed);
  std::shuffle(identities.begin(), identities.end(), rng);
  std::size_t remaining = static_cast<std::size_t>(budget);
  for (auto& g : identities) {
    if (remaining < 2) break;
    if (g.size() > remaining) g.resize(remaining);
    remaining -= g.size();
    out.groups.push_back(std::move(g));
  }
  return out;
}

GroupIndex region_groups(const SyntheticSample& sample, int budget, std::uint64_t seed) {
  check_budget(budget);
  std::vector<std::size_t> offsets{0};
  for (const auto& img : sample.images) offsets.push_back(offsets.back() + img.size());
  const std::size_t total = offsets.back();
  std::mt19937_64 rng(seed);
  // Floyd's algorithm: `budget` distinct flat pixel indices.
  std::set<std::size_t> picks;
  const std::size_t want = std::min<std::size_t>(budget, total);
  for (std::size_t j = total - want; j < total; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (!picks.insert(t).second) picks.insert(j);
  }
  std::map<std::pair<int, int>, std::vector<SampleCoord>> by_region;
  for (std::size_t flat : picks) {
    const int i = static_cast<int>(std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin()) - 1;
    const std::size_t local = flat - offsets[i];
    const int cols = sample.images[i].cols();
    const int r = static_cast<int>(local / cols), c = static_cast<int>(local % cols);
    const int inst = sample.instance_id_maps[i](r, c);
    const int source = inst == 0 ? sample.background_index[i] : sample.record_for_instance(inst).source_index;
    by_region[{source, sample.region_id_maps[i](r, c)}].push_back({i, r, c});
  }
  GroupIndex out;
  out.kind = GroupKind::kRegion;
  for (auto& [key, members] : by_region)
    if (members.size() >= 2) out.groups.push_back(std::move(members));
  return out;
}

GroupIndex downsample(const GroupIndex& index, int stride) {
  if (stride < 1) throw InputError("downsample: stride must be >= 1");
  GroupIndex out;
  out.kind = index.kind;
  std::set<SampleCoord> seen;
  for (const auto& g : index.groups) {
    std::vector<SampleCoord> kept;
    for (const auto& c : g) {
      const SampleCoord d{c.image_index, c.row / stride, c.col / stride};
      if (seen.insert(d).second) kept.push_back(d);
    }
    if (kept.size() >= 2) out.groups.push_back(std::move(kept));
  }
  return out;
}

std::vector<std::vector<int>> row_groups(const GroupIndex& index) {
  std::vector<std::vector<int>> out;
  int next = 0;
  for (const auto& g : index.groups) {
    std::vector<int> rows(g.size());
    std::iota(rows.begin(), rows.end(), next);
    next += static_cast<int>(g.size());
    out.push_back(std::move(rows));
  }
  return out;
}

std::string group_index_to_json(const GroupIndex& index) {
  nlohmann::json j;
  j["kind"] = to_string(index.kind);
  j["groups"] = nlohmann::json::array();
  for (const auto& g : index.groups) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& c : g) members.push_back({c.image_index, c.row, c.col});
    j["groups"].push_back(std::move(members));
  }
  return j.dump() + "\n";
}

GroupIndex group_index_from_json(const std::string& text) {
  GroupIndex out;
  try {
    const auto j = nlohmann::json::parse(text);
    out.kind = group_kind_from_string(j.at("kind").get<std::string>());
    for (const auto& g : j.at("groups")) {
      std::vector<SampleCoord> members;
      for (const auto& c : g) members.push_back({c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>()});
      out.groups.push_back(std::move(members));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("group index json: ") + e.what());
  }
  out.validate();
  return out;
}

void write_group_table(const std::filesystem::path& path, const GroupIndex& index) {
  static_assert(std::endian::native == std::endian::little, "group table writer assumes a little-endian host");
  std::vector<std::uint32_t> table;
  table.reserve(index.num_coords() * 4);
  for (std::size_t g = 0; g < index.groups.size(); ++g)
    for (const auto& c : index.groups[g]) {
      table.push_back(static_cast<std::uint32_t>(c.image_index));
      table.push_back(static_cast<std::uint32_t>(c.row));
      table.push_back(static_cast<std::uint32_t>(c.col));
      table.push_back(static_cast<std::uint32_t>(g));
    }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(table.data()), static_cast<std::streamsize>(table.size() * 4));
}

GroupIndex read_group_table(const std::filesystem::path& path, GroupKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 16 != 0) throw InputError("group table: size is not a multiple of 16 bytes");
  std::vector<std::uint32_t> table(bytes.size() / 4);
  std::memcpy(table.data(), bytes.data(), bytes.size());
  GroupIndex out;
  out.kind = kind;
  for (std::size_t k = 0; k < table.size(); k += 4) {
    const std::uint32_t g = table[k + 3];
    if (g > out.groups.size()) throw InputError("group table: group ids must be contiguous and ascending");
    if (g == out.groups.size()) out.groups.emplace_back();
    if (g + 1 != out.groups.size()) throw InputError("group table: group ids must be contiguous and ascending");
    out.groups[g].push_back(
        {static_cast<int>(table[k]), static_cast<int>(table[k + 1]), static_cast<int>(table[k + 2])});
  }
  out.validate();
  return out;
}

}  // namespace depthgroup
