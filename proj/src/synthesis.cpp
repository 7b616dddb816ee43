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

#include "depthgroup/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "depthgroup/log.hpp"

namespace depthgroup {
namespace {

struct Extent {
  int row0 = 0, row1 = -1, col0 = 0, col1 = -1;
  bool contains(int r, int c) const { return r >= row0 && r <= row1 && c >= col0 && c <= col1; }
};

// Target pixels that can map back into the source bbox, clipped to the target image.
Extent target_extent(const BoundingBox& bbox, const Affine& forward, int rows, int cols) {
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (double y : {bbox.top - 0.5, bbox.bottom + 0.5})
    for (double x : {bbox.left - 0.5, bbox.right + 0.5}) {
      const Point2 p = forward.apply(x, y);
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  Extent e;
  e.col0 = std::max(0, static_cast<int>(std::floor(min_x)) - 1);
  e.col1 = std::min(cols - 1, static_cast<int>(std::ceil(max_x)) + 1);
  e.row0 = std::max(0, static_cast<int>(std::floor(min_y)) - 1);
  e.row1 = std::min(rows - 1, static_cast<int>(std::ceil(max_y)) + 1);
  return e;
}

struct Layer {
  const RegionPatch* patch = nullptr;
  RgbImage rgb;  // jittered, bbox-sized
  double divisor = 1.0;
  Affine inverse;
  Extent extent;
  int instance_id = 0;
};

// Source pixel (bbox-local) under target pixel q, if it lies inside the region mask.
bool lookup(const Layer& layer, int row, int col, int& local_r, int& local_c) {
  const Point2 s = layer.inverse.apply(col, row);
  const int sr = round_pixel(s.y), sc = round_pixel(s.x);
  if (!layer.patch->covers(sr, sc)) return false;
  local_r = sr - layer.patch->bbox.top;
  local_c = sc - layer.patch->bbox.left;
  return true;
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

double gray(const std::array<double, 3>& p) { return 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]; }

// Brightness, then contrast about the mean grey of the selected pixels, then saturation.
void apply_jitter(RgbImage& img, const Mask* mask, const ColorJitter& j) {
  double mean = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    mean += gray({img[i][0] * j.brightness, img[i][1] * j.brightness, img[i][2] * j.brightness});
    ++n;
  }
  if (n == 0) return;
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    std::array<double, 3> p{};
    for (int ch = 0; ch < 3; ++ch) {
      const double v = std::clamp(img[i][ch] * j.brightness, 0.0, 255.0);
      p[ch] = std::clamp((v - mean) * j.contrast + mean, 0.0, 255.0);
    }
    const double g = gray(p);
    for (int ch = 0; ch < 3; ++ch) img[i][ch] = to_u8(g + (p[ch] - g) * j.saturation);
  }
}

void gaussian_blur(RgbImage& img, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) total += kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  for (double& k : kernel) k /= total;
  const int rows = img.rows(), cols = img.cols();
  Grid<std::array<double, 3>> tmp(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::array<double, 3> acc{};
      for (int k = -radius; k <= radius; ++k) {
        const auto& p = img(r, std::clamp(c + k, 0, cols - 1));
        for (int ch = 0; ch < 3; ++ch) acc[ch] += kernel[k + radius] * p[ch];
      }
      tmp(r, c) = acc;
    }
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      std::array<double, 3> acc{};
      for (int k = -radius; k <= radius; ++k) {
        const auto& p = tmp(std::clamp(r + k, 0, rows - 1), c);
        for (int ch = 0; ch < 3; ++ch) acc[ch] += kernel[k + radius] * p[ch];
      }
      for (int ch = 0; ch < 3; ++ch) img(r, c)[ch] = to_u8(acc[ch]);
    }
}

ColorJitter sample_jitter(std::mt19937_64& rng, double strength) {
  std::uniform_real_distribution<double> u(1.0 - strength, 1.0 + strength);
  ColorJitter j;
  j.brightness = u(rng);
  j.contrast = u(rng);
  j.saturation = u(rng);
  return j;
}

Affine sample_background_transform(std::mt19937_64& rng, const PasteConfig& cfg, int rows, int cols) {
  std::uniform_real_distribution<double> area_u(cfg.crop_min_area, 1.0);
  std::uniform_real_distribution<double> log_ratio(std::log(3.0 / 4.0), std::log(4.0 / 3.0));
  const double area = area_u(rng) * rows * cols;
  const double ratio = std::exp(log_ratio(rng));
  const int cw = std::clamp(static_cast<int>(std::lround(std::sqrt(area * ratio))), std::min(2, cols), cols);
  const int ch = std::clamp(static_cast<int>(std::lround(std::sqrt(area / ratio))), std::min(2, rows), rows);
  const int x0 = std::uniform_int_distribution<int>(0, cols - cw)(rng);
  const int y0 = std::uniform_int_distribution<int>(0, rows - ch)(rng);
  const double sx = cw > 1 ? static_cast<double>(cols - 1) / (cw - 1) : 1.0;
  const double sy = ch > 1 ? static_cast<double>(rows - 1) / (ch - 1) : 1.0;
  Affine b = Affine::scaling(sx, sy) * Affine::translation(-x0, -y0);
  if (std::bernoulli_distribution(cfg.flip_probability)(rng)) b = Affine(-1.0, 0.0, cols - 1.0, 0.0, 1.0, 0.0) * b;
  return b;
}

}  // namespace

void PasteConfig::validate() const {
  if (num_images < 1) throw InputError("paste config: num_images must be >= 1");
  if (min_height < 1 || min_width < 1) throw InputError("paste config: size thresholds must be >= 1");
  if (height_threshold < 0) throw InputError("paste config: height threshold must be >= 0");
  if (expectations[0] < 0.0 || expectations[1] < 0.0) throw InputError("paste config: expectations must be >= 0");
  if (!(min_scale > 0.0) || max_scale < min_scale) throw InputError("paste config: invalid scale range");
  if (flip_probability < 0.0 || flip_probability > 1.0) throw InputError("paste config: flip probability");
  if (jitter < 0.0 || jitter >= 1.0) throw InputError("paste config: jitter must lie in [0, 1)");
  if (crop_min_area <= 0.0 || crop_min_area > 1.0) throw InputError("paste config: crop_min_area in (0, 1]");
  if (blur_probability < 0.0 || blur_probability > 1.0) throw InputError("paste config: blur probability");
}

std::vector<RegionPatch> extract_regions(std::span<const DepthFrame> frames, std::span<const RegionMap> regions,
                                         const PasteConfig& config) {
  if (frames.size() != regions.size()) throw InputError("extract_regions: one region map per frame required");
  std::vector<RegionPatch> pool;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& frame = frames[f];
    const auto& rm = regions[f];
    if (!rm.labels.same_shape(frame.depth) || !frame.rgb.same_shape(frame.depth)) {
      throw InputError("extract_regions: region map / frame size mismatch for '" + frame.frame_id + "'");
    }
    for (const auto& info : rm.regions) {
      if (info.bbox.height() < config.min_height || info.bbox.width() < config.min_width) continue;
      RegionPatch p;
      p.source_index = static_cast<int>(f);
      p.source_frame_id = frame.frame_id;
      p.region_id = info.id;
      p.bbox = info.bbox;
      p.position_height = info.anchor_height;
      const int h = info.bbox.height(), w = info.bbox.width();
      p.mask = Mask(h, w, 0);
      p.rgb = RgbImage(h, w);
      p.depth = DepthGrid(h, w, 0.0);
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          const int sr = info.bbox.top + r, sc = info.bbox.left + c;
          p.rgb(r, c) = frame.rgb(sr, sc);
          p.depth(r, c) = frame.depth(sr, sc);
          p.mask(r, c) = rm.labels(sr, sc) == info.id ? 1 : 0;
        }
      pool.push_back(std::move(p));
    }
  }
  if (pool.empty()) log::warn("extract_regions: no region passes the size thresholds; no pastes will be made");
  return pool;
}

CompositeResult depthmix_composite(const RgbImage& target_rgb, const DepthGrid& target_depth,
                                   const RegionPatch& region, const Affine& affine, double depth_divisor) {
  if (!target_rgb.same_shape(target_depth)) throw InputError("depthmix: target rgb/depth size mismatch");
  if (!affine.invertible()) throw InputError("depthmix: affine is not invertible");
  if (!(depth_divisor > 0.0)) throw InputError("depthmix: depth divisor must be positive");
  CompositeResult out{target_rgb, target_depth, Mask(target_rgb.rows(), target_rgb.cols(), 0)};
  Layer layer;
  layer.patch = &region;
  layer.inverse = affine.inverse();
  const Extent ext = target_extent(region.bbox, affine, target_rgb.rows(), target_rgb.cols());
  for (int r = ext.row0; r <= ext.row1; ++r)
    for (int c = ext.col0; c <= ext.col1; ++c) {
      int lr = 0, lc = 0;
      if (!lookup(layer, r, c, lr, lc)) continue;
      const double d = region.depth(lr, lc) / depth_divisor;
      if (d < out.depth(r, c)) {
        out.depth(r, c) = d;
        out.rgb(r, c) = region.rgb(lr, lc);
        out.visible(r, c) = 1;
      }
    }
  return out;
}

SourcePixel trace_source(const SyntheticSample& sample, int image, int row, int col) {
  const int inst = sample.instance_id_maps.at(image)(row, col);
  if (inst == 0) {
    const Affine inv = sample.background_transforms.at(image).inverse();
    const Point2 p = inv.apply(col, row);
    const auto& labels = sample.region_id_maps.at(image);
    return {sample.background_index.at(image), std::clamp(round_pixel(p.y), 0, labels.rows() - 1),
            std::clamp(round_pixel(p.x), 0, labels.cols() - 1)};
  }
  const auto& rec = sample.record_for_instance(inst);
  const Point2 s = rec.affine.inverse().apply(col, row);
  return {rec.source_index, round_pixel(s.y), round_pixel(s.x)};
}

SyntheticSample synthesize(std::span<const DepthFrame> frames, std::span<const RegionMap> regions,
                           const PasteConfig& config, std::optional<std::uint64_t> seed) {
  if (!seed) throw InputError("synthesize: a seed is required for reproducible synthesis");
  config.validate();
  if (static_cast<int>(frames.size()) != config.num_images) {
    throw InputError("synthesize: expected " + std::to_string(config.num_images) + " frames, got " +
                     std::to_string(frames.size()));
  }
  if (regions.size() != frames.size()) throw InputError("synthesize: one region map per frame required");
  const auto pool = extract_regions(frames, regions, config);
  const int m = config.num_images;
  std::mt19937_64 rng(*seed);

  SyntheticSample out;
  for (const auto& f : frames) out.source_frame_ids.push_back(f.frame_id);

  for (int round = 0; round < 2; ++round) {
    const double expected = config.expectations[round] * static_cast<double>(pool.size()) / m;
    const int pastes = pool.empty() ? 0 : static_cast<int>(std::floor(expected + 1e-9));
    for (int b = 0; b < m; ++b) {
      const int image = round * m + b;
      const DepthFrame& bg = frames[b];
      const int rows = bg.rows(), cols = bg.cols();
      const Affine bg_tf =
          config.image_augment ? sample_background_transform(rng, config, rows, cols) : Affine::identity();

      std::vector<Layer> layers;
      layers.reserve(pastes);
      const std::size_t first_record = out.records.size();
      for (int k = 0; k < pastes; ++k) {
        const RegionPatch& patch = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        TransformRecord rec;
        rec.target_image = image;
        rec.source_index = patch.source_index;
        rec.source_frame_id = patch.source_frame_id;
        rec.region_id = patch.region_id;
        rec.instance_id = static_cast<int>(out.records.size()) + 1;
        rec.scale = std::exp(std::uniform_real_distribution<double>(std::log(config.min_scale),
                                                                     std::log(config.max_scale))(rng));
        rec.flipped = std::bernoulli_distribution(config.flip_probability)(rng);
        rec.jitter = sample_jitter(rng, config.jitter);
        // Resizing keeps the region's bottom edge in place, so its top row moves.
        rec.position_height = round_pixel(patch.bbox.top + (1.0 - rec.scale) * patch.bbox.height());
        rec.placed_x = std::uniform_int_distribution<int>(0, cols - 1)(rng);
        rec.placed_y = std::uniform_int_distribution<int>(rec.position_height - config.height_threshold,
                                                          rec.position_height + config.height_threshold)(rng);
        const Affine to_local = rec.flipped ? Affine(-1.0, 0.0, patch.bbox.right, 0.0, 1.0, -patch.bbox.top)
                                            : Affine::translation(-patch.bbox.left, -patch.bbox.top);
        rec.paste_affine =
            Affine::translation(rec.placed_x, rec.placed_y) * Affine::scaling(rec.scale, rec.scale) * to_local;
        rec.affine = bg_tf * rec.paste_affine;

        Layer layer;
        layer.patch = &patch;
        layer.rgb = patch.rgb;
        apply_jitter(layer.rgb, &patch.mask, rec.jitter);
        layer.divisor = rec.scale;
        layer.inverse = rec.affine.inverse();
        layer.extent = target_extent(patch.bbox, rec.affine, rows, cols);
        layer.instance_id = rec.instance_id;
        layers.push_back(std::move(layer));
        out.records.push_back(std::move(rec));
      }

      // Evaluate every final pixel through the background transform and the paste stack in order.
      const Affine bg_inv = bg_tf.inverse();
      RgbImage img(rows, cols);
      DepthGrid depth(rows, cols);
      LabelGrid region_map(rows, cols), instance_map(rows, cols, 0);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          const Point2 p = bg_inv.apply(c, r);
          const int br = std::clamp(round_pixel(p.y), 0, rows - 1), bc = std::clamp(round_pixel(p.x), 0, cols - 1);
          Rgb px = bg.rgb(br, bc);
          double d = bg.depth(br, bc);
          int reg = regions[b].labels(br, bc);
          int inst = 0;
          for (const Layer& layer : layers) {
            if (!layer.extent.contains(r, c)) continue;
            int lr = 0, lc = 0;
            if (!lookup(layer, r, c, lr, lc)) continue;
            const double pd = layer.patch->depth(lr, lc) / layer.divisor;
            if (pd < d) {
              d = pd;
              px = layer.rgb(lr, lc);
              reg = layer.patch->region_id;
              inst = layer.instance_id;
            }
          }
          img(r, c) = px;
          depth(r, c) = d;
          region_map(r, c) = reg;
          instance_map(r, c) = inst;
        }

      if (config.image_augment) {
        apply_jitter(img, nullptr, sample_jitter(rng, config.jitter));
        if (std::bernoulli_distribution(config.blur_probability)(rng)) {
          gaussian_blur(img, std::uniform_real_distribution<double>(0.1, 2.0)(rng));
        }
      }
      for (std::size_t k = first_record; k < out.records.size(); ++k) {
        auto& rec = out.records[k];
        rec.visibility_mask = Mask(rows, cols, 0);
        for (std::size_t i = 0; i < instance_map.size(); ++i)
          if (instance_map[i] == rec.instance_id) rec.visibility_mask[i] = 1;
      }
      out.images.push_back(std::move(img));
      out.depths.push_back(std::move(depth));
      out.region_id_maps.push_back(std::move(region_map));
      out.instance_id_maps.push_back(std::move(instance_map));
      out.background_index.push_back(b);
      out.background_transforms.push_back(bg_tf);
    }
  }
  return out;
}

}  // namespace depthgroup
