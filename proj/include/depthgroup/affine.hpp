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
#include <cmath>

namespace depthgroup {

/// Nearest integer, halves rounded up; the single rounding rule used for every pixel lookup.
inline int round_pixel(double v) { return static_cast<int>(std::floor(v + 0.5)); }

struct Point2 {
  double x = 0.0;  // column
  double y = 0.0;  // row
};

/// 2D affine map on pixel coordinates (x = column, y = row), stored as the top two rows of a
/// row-major 3x3 matrix.
class Affine {
 public:
  Affine() = default;
  Affine(double a, double b, double tx, double c, double d, double ty) : m_{a, b, tx, c, d, ty} {}

  static Affine identity() { return {}; }
  static Affine translation(double tx, double ty) { return {1.0, 0.0, tx, 0.0, 1.0, ty}; }
  static Affine scaling(double sx, double sy) { return {sx, 0.0, 0.0, 0.0, sy, 0.0}; }

  Point2 apply(double x, double y) const {
    return {m_[0] * x + m_[1] * y + m_[2], m_[3] * x + m_[4] * y + m_[5]};
  }

  /// (*this) after `rhs`: x -> this(rhs(x)).
  Affine operator*(const Affine& rhs) const {
    const auto& a = m_;
    const auto& b = rhs.m_;
    return {a[0] * b[0] + a[1] * b[3],        a[0] * b[1] + a[1] * b[4], a[0] * b[2] + a[1] * b[5] + a[2],
            a[3] * b[0] + a[4] * b[3],        a[3] * b[1] + a[4] * b[4], a[3] * b[2] + a[4] * b[5] + a[5]};
  }

  double determinant() const { return m_[0] * m_[4] - m_[1] * m_[3]; }
  bool invertible() const { return std::abs(determinant()) > 1e-12; }

  Affine inverse() const {
    const double det = determinant();
    const double ia = m_[4] / det, ib = -m_[1] / det, ic = -m_[3] / det, id = m_[0] / det;
    return {ia, ib, -(ia * m_[2] + ib * m_[5]), ic, id, -(ic * m_[2] + id * m_[5])};
  }

  bool is_identity() const { return m_ == std::array<double, 6>{1.0, 0.0, 0.0, 0.0, 1.0, 0.0}; }

  /// Row-major 3x3 including the homogeneous row.
  std::array<double, 9> matrix() const { return {m_[0], m_[1], m_[2], m_[3], m_[4], m_[5], 0.0, 0.0, 1.0}; }
  static Affine from_matrix(const std::array<double, 9>& m) { return {m[0], m[1], m[2], m[3], m[4], m[5]}; }

  const std::array<double, 6>& coefficients() const { return m_; }
  friend bool operator==(const Affine&, const Affine&) = default;

 private:
  std::array<double, 6> m_{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
};

}  // namespace depthgroup
