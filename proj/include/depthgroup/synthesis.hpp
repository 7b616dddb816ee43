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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "depthgroup/affine.hpp"
#include "depthgroup/community.hpp"
#include "depthgroup/geometry.hpp"
#include "depthgroup/grid.hpp"

namespace depthgroup {

struct PasteConfig {
  int num_images = 8;                       // M
  int min_height = 16;                      // region bbox height threshold (inclusive)
  int min_width = 6;                        // region bbox width threshold (inclusive)
  int height_threshold = 16;                // h_t: max vertical offset from the adjusted anchor
  std::array<double, 2> expectations{1.0, 2.0};

  double min_scale = 0.5;                   // per-paste resize, log-uniform
  double max_scale = 2.0;
  double flip_probability = 0.5;
  double jitter = 0.4;                      // brightness / contrast / saturation strength

  bool image_augment = false;               // whole-image resized crop, flip, colour, blur
  double crop_min_area = 0.5;
  double blur_probability = 0.5;

  void validate() const;
};

/// A depth-coherent region cut out of a source frame, in source-bbox-local storage.
struct RegionPatch {
  int source_index = 0;  // index into the frames given to synthesis
  std::string source_frame_id;
  int region_id = 0;
  BoundingBox bbox;      // source image coordinates
  Mask mask;             // bbox-sized
  RgbImage rgb;          // bbox-sized
  DepthGrid depth;       // bbox-sized, meters
  int position_height = 0;

  bool covers(int row, int col) const {
    return row >= bbox.top && row <= bbox.bottom && col >= bbox.left && col <= bbox.right &&
           mask(row - bbox.top, col - bbox.left) != 0;
  }
};

/// All regions whose bbox height >= min_height and width >= min_width. Warns when empty.
std::vector<RegionPatch> extract_regions(std::span<const DepthFrame> frames, std::span<const RegionMap> regions,
                                         const PasteConfig& config);

struct CompositeResult {
  RgbImage rgb;
  DepthGrid depth;
  Mask visible;  // target-sized
};

/// Pastes `region` through `affine` (source pixel -> target pixel). Every target pixel maps back by
/// nearest-neighbour inverse lookup; it is overwritten iff that source pixel is in the mask and its depth
/// (divided by `depth_divisor`) is strictly smaller than the target depth there.
CompositeResult depthmix_composite(const RgbImage& target_rgb, const DepthGrid& target_depth,
                                   const RegionPatch& region, const Affine& affine, double depth_divisor = 1.0);

struct ColorJitter {
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
};

struct TransformRecord {
  int target_image = 0;
  int source_index = 0;
  std::string source_frame_id;
  int region_id = 0;
  int instance_id = 0;        // >= 1; value in instance_id_maps
  Affine affine;              // source pixel -> final target pixel (background transform included)
  Affine paste_affine;        // source pixel -> target pixel before whole-image augmentation
  double scale = 1.0;         // resize factor; pasted depth is divided by it
  bool flipped = false;
  ColorJitter jitter;
  int position_height = 0;    // anchor after augmentation adjustment
  int placed_x = 0;
  int placed_y = 0;
  Mask visibility_mask;       // final target coordinates
};

struct SyntheticSample {
  std::vector<std::string> source_frame_ids;  // M sources
  std::vector<RgbImage> images;               // 2M
  std::vector<DepthGrid> depths;
  std::vector<LabelGrid> region_id_maps;      // source region id of whichever layer owns the pixel
  std::vector<LabelGrid> instance_id_maps;    // 0 = background frame, otherwise record instance_id
  std::vector<int> background_index;          // per image, index into sources
  std::vector<Affine> background_transforms;  // per image, pre-augmentation -> final coordinates
  std::vector<TransformRecord> records;

  int num_sources() const { return static_cast<int>(source_frame_ids.size()); }
  const TransformRecord& record_for_instance(int instance_id) const { return records.at(instance_id - 1); }
};

/// Source frame index and pixel that produced final pixel (row, col) of image `image`.
struct SourcePixel {
  int source_index = 0;
  int row = 0;
  int col = 0;
  friend bool operator==(const SourcePixel&, const SourcePixel&) = default;
};
SourcePixel trace_source(const SyntheticSample& sample, int image, int row, int col);

/// Two copy-paste rounds over the M backgrounds; floor(e_r * |R| / M) pastes per image in round r.
/// A seed is mandatory.
SyntheticSample synthesize(std::span<const DepthFrame> frames, std::span<const RegionMap> regions,
                           const PasteConfig& config, std::optional<std::uint64_t> seed);

}  // namespace depthgroup
