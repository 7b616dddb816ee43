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

#include "depthgroup/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

namespace depthgroup::io {
namespace {

using nlohmann::json;

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

json intrinsics_to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const json& j) {
  CameraIntrinsics k;
  try {
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
  } catch (const json::exception& e) {
    throw InputError(std::string("intrinsics JSON: ") + e.what());
  }
  k.validate();
  return k;
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw InputError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

cv::Mat imread_checked(const fs::path& path, int flags) {
  if (!fs::exists(path)) throw InputError("missing file: " + path.string());
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw InputError("unreadable image: " + path.string());
  return m;
}

void imwrite_checked(const fs::path& path, const cv::Mat& m) {
  ensure_parent(path);
  const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 3};
  if (!cv::imwrite(path.string(), m, params)) throw std::runtime_error("failed to write " + path.string());
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("failed to write " + path.string());
  out << text;
}

CameraIntrinsics read_intrinsics(const fs::path& path) { return intrinsics_from_json(parse_json_file(path)); }

void write_intrinsics(const fs::path& path, const CameraIntrinsics& k) {
  write_text(path, intrinsics_to_json(k).dump(2) + "\n");
}

RgbImage read_rgb(const fs::path& path) {
  cv::Mat m = imread_checked(path, cv::IMREAD_COLOR);
  RgbImage out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r) {
    const auto* row = m.ptr<cv::Vec3b>(r);
    for (int c = 0; c < m.cols; ++c) out(r, c) = {row[c][2], row[c][1], row[c][0]};
  }
  return out;
}

void write_rgb(const fs::path& path, const RgbImage& image) {
  cv::Mat m(image.rows(), image.cols(), CV_8UC3);
  for (int r = 0; r < m.rows; ++r) {
    auto* row = m.ptr<cv::Vec3b>(r);
    for (int c = 0; c < m.cols; ++c) {
      const Rgb& p = image(r, c);
      row[c] = cv::Vec3b(p[2], p[1], p[0]);
    }
  }
  imwrite_checked(path, m);
}

LabelGrid read_label_png(const fs::path& path) {
  cv::Mat m = imread_checked(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  LabelGrid out(m.rows, m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      out(r, c) = m.depth() == CV_16U ? m.at<std::uint16_t>(r, c) : m.at<std::uint8_t>(r, c);
  return out;
}

void write_label_png(const fs::path& path, const LabelGrid& labels) {
  cv::Mat m(labels.rows(), labels.cols(), CV_16UC1);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      const auto v = labels(r, c);
      if (v < 0 || v > 65535) throw InputError("label out of 16-bit range in " + path.string());
      m.at<std::uint16_t>(r, c) = static_cast<std::uint16_t>(v);
    }
  imwrite_checked(path, m);
}

fs::path depth_sidecar_path(const fs::path& depth_png) {
  fs::path p = depth_png;
  p.replace_extension(".json");
  return p;
}

DepthFile read_depth(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pfm" || ext == ".PFM") return {read_pfm(path), std::nullopt};
  if (ext != ".png" && ext != ".PNG") throw InputError("unsupported depth format: " + path.string());

  const json side = parse_json_file(depth_sidecar_path(path));
  if (!side.contains("scale") || !side["scale"].is_number()) {
    throw InputError("depth sidecar lacks numeric 'scale': " + depth_sidecar_path(path).string());
  }
  const double scale = side["scale"].get<double>();
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InputError("depth sidecar scale must be positive");

  cv::Mat m = imread_checked(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.depth() != CV_16U) throw InputError("depth PNG must be 16-bit: " + path.string());
  DepthFile out{DepthGrid(m.rows, m.cols), std::nullopt};
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out.depth(r, c) = m.at<std::uint16_t>(r, c) * scale;
  if (side.contains("intrinsics")) out.intrinsics = intrinsics_from_json(side["intrinsics"]);
  return out;
}

void write_depth_png(const fs::path& path, const DepthGrid& depth, double scale,
                     const std::optional<CameraIntrinsics>& intrinsics) {
  if (!(scale > 0.0)) throw InputError("depth scale must be positive");
  cv::Mat m(depth.rows(), depth.cols(), CV_16UC1);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      const double units = std::round(depth(r, c) / scale);
      if (!(units >= 1.0 && units <= 65535.0)) {
        throw InputError(path.string() + ": depth " + std::to_string(depth(r, c)) + " at (row " + std::to_string(r) +
                         ", col " + std::to_string(c) + ") does not fit 16 bits at scale " + std::to_string(scale));
      }
      m.at<std::uint16_t>(r, c) = static_cast<std::uint16_t>(units);
    }
  imwrite_checked(path, m);
  json side = {{"scale", scale}};
  if (intrinsics) side["intrinsics"] = intrinsics_to_json(*intrinsics);
  write_text(depth_sidecar_path(path), side.dump(2) + "\n");
}

DepthGrid read_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing file: " + path.string());
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  in.get();  // single whitespace before the raster
  if (!in || (magic != "Pf" && magic != "PF") || width <= 0 || height <= 0 || scale == 0.0) {
    throw InputError("malformed PFM header: " + path.string());
  }
  const int channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  std::vector<float> raster(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size() * sizeof(float)));
  if (!in) throw InputError("truncated PFM raster: " + path.string());
  if (little != (std::endian::native == std::endian::little)) {
    for (auto& v : raster) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = __builtin_bswap32(bits);
      std::memcpy(&v, &bits, 4);
    }
  }
  // PFM rows run bottom to top; the first channel carries depth.
  DepthGrid out(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      out(height - 1 - r, c) = raster[(static_cast<std::size_t>(r) * width + c) * channels];
  return out;
}

void write_pfm(const fs::path& path, const DepthGrid& depth) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("failed to write " + path.string());
  const bool little = std::endian::native == std::endian::little;
  out << "Pf\n" << depth.cols() << " " << depth.rows() << "\n" << (little ? "-1.0" : "1.0") << "\n";
  for (int r = depth.rows() - 1; r >= 0; --r)
    for (int c = 0; c < depth.cols(); ++c) {
      const float v = static_cast<float>(depth(r, c));
      out.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
}

DepthFrame load_frame(const std::string& frame_id, const fs::path& rgb, const fs::path& depth,
                      const std::optional<fs::path>& intrinsics) {
  DepthFrame frame;
  frame.frame_id = frame_id;
  frame.rgb = read_rgb(rgb);
  DepthFile d = read_depth(depth);
  frame.depth = std::move(d.depth);
  if (intrinsics) {
    frame.intrinsics = read_intrinsics(*intrinsics);
  } else if (d.intrinsics) {
    frame.intrinsics = *d.intrinsics;
  } else {
    throw InputError("frame '" + frame_id + "': no intrinsics file and none in depth sidecar");
  }
  frame.validate();
  return frame;
}

}  // namespace depthgroup::io
