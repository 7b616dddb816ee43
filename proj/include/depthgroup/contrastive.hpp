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
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "depthgroup/grid.hpp"

namespace depthgroup {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Throws InputError unless every row has unit norm within `tol`.
template <typename T>
void check_unit_rows(const RowMatrix<T>& m, const std::string& what, double tol = 1e-5);

template <typename T>
RowMatrix<T> normalize_rows(const RowMatrix<T>& m);

/// Row-wise softmax of Z·Cᵀ/tau (N×K).
template <typename T>
RowMatrix<T> soft_assign(const RowMatrix<T>& z, const RowMatrix<T>& c, double tau);

struct SinkhornConfig {
  double eps = 0.05;
  int iters = 3;
  bool until_converged = false;  // ignore `iters`, run until the marginal error is below `tolerance`
  double tolerance = 1e-12;
  int max_iters = 100000;
};

struct SinkhornDiagnostics {
  int iterations = 0;
  double row_error = 0.0;  // max |row sum - 1|
  double col_error = 0.0;  // max |col sum - N/K|
  bool converged = false;
};

/// Balanced codes for assignments P computed with temperature tau. The transport kernel is P^(tau/eps),
/// i.e. exp(Z·Cᵀ/eps) up to row scaling. Each iteration scales columns to N/K, then rows to 1.
template <typename T>
RowMatrix<T> sinkhorn_codes(const RowMatrix<T>& p, double tau, const SinkhornConfig& config,
                            SinkhornDiagnostics* diagnostics = nullptr);

/// Replaces each grouped row by the mean of its group; ungrouped rows are unchanged.
template <typename T>
RowMatrix<T> group_average(const RowMatrix<T>& q, const std::vector<std::vector<int>>& groups);

/// −(1/N) Σ_n Σ_k q̄_nk log p_nk.
template <typename T>
double swap_loss(const RowMatrix<T>& p, const RowMatrix<T>& qbar);

template <typename T>
struct LossResult {
  double loss = 0.0;
  RowMatrix<T> dz;  // projected onto the tangent space of each unit-norm row
  RowMatrix<T> dc;
  RowMatrix<T> p;
  RowMatrix<T> q;
  RowMatrix<T> qbar;
  SinkhornDiagnostics sinkhorn;
};

/// Unprojected gradients of swap_loss with Q̄ held constant.
template <typename T>
void raw_gradient(const RowMatrix<T>& z, const RowMatrix<T>& c, const RowMatrix<T>& p, const RowMatrix<T>& qbar,
                  double tau, RowMatrix<T>& dz, RowMatrix<T>& dc);

/// Removes the component of each gradient row along the matching unit row of `base`.
template <typename T>
RowMatrix<T> project_tangent(const RowMatrix<T>& grad, const RowMatrix<T>& base);

template <typename T>
LossResult<T> loss_gradient(const RowMatrix<T>& z, const RowMatrix<T>& c, const std::vector<std::vector<int>>& groups,
                            double tau, const SinkhornConfig& sinkhorn = {});

double combined_loss(double pixel_loss, double region_loss, double lambda);

/// Average-linkage agglomeration under cosine distance. Returns prototype id -> class id, with classes
/// numbered by their smallest prototype id.
std::vector<int> agglomerate(const RowMatrix<double>& prototypes, int target_classes);

struct PcaResult {
  Eigen::VectorXd mean;
  RowMatrix<double> components;  // rank_used×d, unit rows, largest-magnitude loading positive
  Eigen::VectorXd variances;
  RowMatrix<double> projections;  // N×3, zero columns beyond rank_used
  int rank_used = 0;
};

PcaResult pca(const RowMatrix<double>& features, int num_components = 3);

/// Top-3 principal components of an H×W feature map (rows in raster order), each min-max scaled to [0,255].
RgbImage pca_rgb(const RowMatrix<double>& features, int rows, int cols);

/// Binary matrix file: "DGFS", u32 N, u32 d, row-major little-endian f32.
void write_feature_file(const std::filesystem::path& path, const RowMatrix<float>& m);
RowMatrix<float> read_feature_file(const std::filesystem::path& path);

std::string class_mapping_to_json(const std::vector<int>& mapping);

}  // namespace depthgroup
