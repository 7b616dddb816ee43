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

#include "depthgroup/contrastive.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "depthgroup/log.hpp"

namespace depthgroup {
namespace {

template <typename T>
void check_positive_rows(const RowMatrix<T>& p, const char* what) {
  if (p.rows() < 1 || p.cols() < 1) throw InputError(std::string(what) + ": empty matrix");
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const T v = p.data()[i];
    if (!(v > T(0)) || !std::isfinite(v)) throw InputError(std::string(what) + ": entries must be positive and finite");
  }
}

template <typename Vec>
double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

template <typename T>
void check_unit_rows(const RowMatrix<T>& m, const std::string& what, double tol) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).template cast<double>().norm();
    if (std::abs(n - 1.0) > tol) {
      throw InputError(what + ": row " + std::to_string(i) + " has norm " + std::to_string(n) + ", expected 1");
    }
  }
}

template <typename T>
RowMatrix<T> normalize_rows(const RowMatrix<T>& m) {
  RowMatrix<T> out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const T n = out.row(i).norm();
    if (n > T(0)) out.row(i) /= n;
  }
  return out;
}

template <typename T>
RowMatrix<T> soft_assign(const RowMatrix<T>& z, const RowMatrix<T>& c, double tau) {
  if (!(tau > 0.0)) throw InputError("soft_assign: tau must be positive");
  if (z.cols() != c.cols()) throw InputError("soft_assign: feature and prototype dimensions differ");
  if (z.rows() < 1 || c.rows() < 1) throw InputError("soft_assign: empty input");
  RowMatrix<T> p = (z * c.transpose()) / static_cast<T>(tau);
  for (Eigen::Index n = 0; n < p.rows(); ++n) {
    const T m = p.row(n).maxCoeff();
    p.row(n) = (p.row(n).array() - m).exp();
    p.row(n) /= p.row(n).sum();
  }
  return p;
}

template <typename T>
RowMatrix<T> sinkhorn_codes(const RowMatrix<T>& p, double tau, const SinkhornConfig& config,
                            SinkhornDiagnostics* diagnostics) {
  check_positive_rows(p, "sinkhorn_codes");
  if (!(config.eps > 0.0)) throw InputError("sinkhorn_codes: eps must be positive");
  if (!(tau > 0.0)) throw InputError("sinkhorn_codes: tau must be positive");
  if (!config.until_converged && config.iters < 1) throw InputError("sinkhorn_codes: iters must be >= 1");
  const Eigen::Index n = p.rows(), k = p.cols();
  const double exponent = tau / config.eps;
  const double log_col_target = std::log(static_cast<double>(n) / static_cast<double>(k));

  // log Q = log_kernel + a (per row) + b (per column); kept in double for stability.
  Eigen::MatrixXd log_kernel = p.template cast<double>().array().log().matrix() * exponent;
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n), b = Eigen::VectorXd::Zero(k);
  const int limit = config.until_converged ? config.max_iters : config.iters;

  auto col_error = [&]() {
    double err = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double s = ((log_kernel.col(j) + a).array() + b(j)).exp().sum();
      err = std::max(err, std::abs(s - static_cast<double>(n) / static_cast<double>(k)));
    }
    return err;
  };

  SinkhornDiagnostics diag;
  for (int it = 0; it < limit; ++it) {
    for (Eigen::Index j = 0; j < k; ++j) b(j) = log_col_target - log_sum_exp(log_kernel.col(j) + a);
    for (Eigen::Index i = 0; i < n; ++i) a(i) = -log_sum_exp(log_kernel.row(i).transpose() + b);
    diag.iterations = it + 1;
    if (config.until_converged) {
      diag.col_error = col_error();
      if (diag.col_error < config.tolerance) {
        diag.converged = true;
        break;
      }
    }
  }
  RowMatrix<T> q(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) q(i, j) = static_cast<T>(std::exp(log_kernel(i, j) + a(i) + b(j)));

  const Eigen::MatrixXd qd = q.template cast<double>();
  diag.row_error = (qd.rowwise().sum().array() - 1.0).abs().maxCoeff();
  diag.col_error = (qd.colwise().sum().array() - static_cast<double>(n) / static_cast<double>(k)).abs().maxCoeff();
  if (config.until_converged && !diag.converged) {
    log::warn("sinkhorn_codes: no convergence after " + std::to_string(diag.iterations) + " iterations (column error " +
              std::to_string(diag.col_error) + ")");
  }
  if (diagnostics) *diagnostics = diag;
  return q;
}

template <typename T>
RowMatrix<T> group_average(const RowMatrix<T>& q, const std::vector<std::vector<int>>& groups) {
  RowMatrix<T> out = q;
  std::vector<char> used(static_cast<std::size_t>(q.rows()), 0);
  for (const auto& g : groups) {
    if (g.empty()) continue;
    Eigen::Matrix<T, 1, Eigen::Dynamic> mean = Eigen::Matrix<T, 1, Eigen::Dynamic>::Zero(q.cols());
    for (int r : g) {
      if (r < 0 || r >= q.rows()) throw InputError("group_average: row index out of range");
      if (used[r]) throw InputError("group_average: groups overlap at row " + std::to_string(r));
      used[r] = 1;
      mean += q.row(r);
    }
    mean /= static_cast<T>(g.size());
    for (int r : g) out.row(r) = mean;
  }
  return out;
}

template <typename T>
double swap_loss(const RowMatrix<T>& p, const RowMatrix<T>& qbar) {
  if (p.rows() != qbar.rows() || p.cols() != qbar.cols()) throw InputError("swap_loss: shape mismatch");
  check_positive_rows(p, "swap_loss");
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double qv = qbar(i, j);
      if (qv != 0.0) total -= qv * std::log(static_cast<double>(p(i, j)));
    }
  return total / static_cast<double>(p.rows());
}

template <typename T>
void raw_gradient(const RowMatrix<T>& z, const RowMatrix<T>& c, const RowMatrix<T>& p, const RowMatrix<T>& qbar,
                  double tau, RowMatrix<T>& dz, RowMatrix<T>& dc) {
  const RowMatrix<T> g = (p - qbar) / static_cast<T>(static_cast<double>(p.rows()) * tau);
  dz = g * c;
  dc = g.transpose() * z;
}

template <typename T>
RowMatrix<T> project_tangent(const RowMatrix<T>& grad, const RowMatrix<T>& base) {
  RowMatrix<T> out = grad;
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) -= out.row(i).dot(base.row(i)) * base.row(i);
  return out;
}

template <typename T>
LossResult<T> loss_gradient(const RowMatrix<T>& z, const RowMatrix<T>& c, const std::vector<std::vector<int>>& groups,
                            double tau, const SinkhornConfig& sinkhorn) {
  if (z.cols() < 2) throw InputError("loss_gradient: feature dimension must be >= 2");
  check_unit_rows(z, "features");
  check_unit_rows(c, "prototypes");
  LossResult<T> r;
  r.p = soft_assign(z, c, tau);
  r.q = sinkhorn_codes(r.p, tau, sinkhorn, &r.sinkhorn);
  r.qbar = group_average(r.q, groups);
  r.loss = swap_loss(r.p, r.qbar);
  RowMatrix<T> dz, dc;
  raw_gradient(z, c, r.p, r.qbar, tau, dz, dc);
  r.dz = project_tangent(dz, z);
  r.dc = project_tangent(dc, c);
  return r;
}

double combined_loss(double pixel_loss, double region_loss, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("combined_loss: lambda must lie in [0, 1]");
  return lambda * pixel_loss + (1.0 - lambda) * region_loss;
}

std::vector<int> agglomerate(const RowMatrix<double>& prototypes, int target_classes) {
  const int k = static_cast<int>(prototypes.rows());
  if (target_classes < 1 || target_classes > k) throw InputError("agglomerate: target must lie in [1, K]");
  // Cluster i is identified by its smallest member; merging j into i (i < j) keeps id i.
  Eigen::MatrixXd dist = Eigen::MatrixXd::Ones(k, k) - prototypes * prototypes.transpose();
  std::vector<int> size(k, 1), parent(k);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<char> active(k, 1);
  // Row cache: lexicographically smallest (distance, j) over active j > i.
  std::vector<int> nn(k, -1);
  std::vector<double> nnd(k, std::numeric_limits<double>::infinity());
  auto refresh = [&](int i) {
    nn[i] = -1;
    nnd[i] = std::numeric_limits<double>::infinity();
    for (int j = i + 1; j < k; ++j)
      if (active[j] && dist(i, j) < nnd[i]) {
        nnd[i] = dist(i, j);
        nn[i] = j;
      }
  };
  for (int i = 0; i < k; ++i) refresh(i);

  for (int clusters = k; clusters > target_classes; --clusters) {
    int i = -1;
    for (int a = 0; a < k; ++a)
      if (active[a] && nn[a] >= 0 && (i < 0 || nnd[a] < nnd[i])) i = a;
    const int j = nn[i];
    for (int m = 0; m < k; ++m) {
      if (!active[m] || m == i || m == j) continue;
      const double d = (size[i] * dist(i, m) + size[j] * dist(j, m)) / (size[i] + size[j]);
      dist(i, m) = dist(m, i) = d;
    }
    size[i] += size[j];
    active[j] = 0;
    parent[j] = i;
    refresh(i);
    for (int m = 0; m < i; ++m) {
      if (!active[m]) continue;
      if (nn[m] == i || nn[m] == j) {
        refresh(m);
      } else if (dist(m, i) < nnd[m] || (dist(m, i) == nnd[m] && i < nn[m])) {
        nnd[m] = dist(m, i);
        nn[m] = i;
      }
    }
    for (int m = i + 1; m < j; ++m)
      if (active[m] && nn[m] == j) refresh(m);
  }

  std::vector<int> root(k), class_of(k, -1), mapping(k);
  int next = 0;
  for (int p = 0; p < k; ++p) {
    int r = p;
    while (parent[r] != r) r = parent[r];
    if (class_of[r] < 0) class_of[r] = next++;
    mapping[p] = class_of[r];
  }
  return mapping;
}

PcaResult pca(const RowMatrix<double>& features, int num_components) {
  const Eigen::Index n = features.rows(), d = features.cols();
  if (n < 1) throw InputError("pca: empty feature set");
  if (d < num_components) throw InputError("pca: feature dimension below the number of components");
  PcaResult r;
  r.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - r.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  const double largest = std::max(evals(d - 1), 0.0);
  // Centring leaves rounding residue of order eps * |x|, so the cutoff also scales with the raw magnitude.
  const double cutoff = 1e-12 * std::max(largest, features.cwiseAbs2().maxCoeff());
  r.components = RowMatrix<double>(num_components, d);
  r.variances = Eigen::VectorXd::Zero(num_components);
  for (int c = 0; c < num_components; ++c) {
    const double ev = evals(d - 1 - c);
    if (!(ev > cutoff)) break;
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - c);
    Eigen::Index arg = 0;
    for (Eigen::Index t = 1; t < d; ++t)
      if (std::abs(v(t)) > std::abs(v(arg)) + 1e-12) arg = t;
    if (v(arg) < 0.0) v = -v;
    r.components.row(c) = v.transpose();
    r.variances(c) = ev;
    r.rank_used = c + 1;
  }
  r.components.conservativeResize(r.rank_used, d);
  r.variances.conservativeResize(r.rank_used);
  r.projections = RowMatrix<double>::Zero(n, num_components);
  if (r.rank_used > 0) r.projections.leftCols(r.rank_used) = centered * r.components.transpose();
  return r;
}

RgbImage pca_rgb(const RowMatrix<double>& features, int rows, int cols) {
  if (features.rows() != static_cast<Eigen::Index>(rows) * cols) {
    throw InputError("pca_rgb: feature count does not match the map size");
  }
  if (features.cols() < 3) throw InputError("pca_rgb: feature dimension must be >= 3");
  const PcaResult r = pca(features, 3);
  RgbImage out(rows, cols, Rgb{128, 128, 128});
  if (r.rank_used == 0) return out;  // constant map
  if (r.rank_used < 3) log::warn("pca_rgb: feature rank below 3; trailing channels set to 0");
  for (int ch = 0; ch < 3; ++ch) {
    if (ch >= r.rank_used) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i][ch] = 0;
      continue;
    }
    const double lo = r.projections.col(ch).minCoeff(), hi = r.projections.col(ch).maxCoeff();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double t = hi > lo ? (r.projections(static_cast<Eigen::Index>(i), ch) - lo) / (hi - lo) : 0.5;
      out[i][ch] = static_cast<std::uint8_t>(std::lround(255.0 * t));
    }
  }
  return out;
}

void write_feature_file(const std::filesystem::path& path, const RowMatrix<float>& m) {
  static_assert(std::endian::native == std::endian::little, "feature file writer assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::uint32_t header[2] = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  out.write("DGFS", 4);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

RowMatrix<float> read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  char magic[4];
  std::uint32_t header[2];
  if (!in.read(magic, 4) || std::memcmp(magic, "DGFS", 4) != 0) throw InputError(path.string() + ": bad magic");
  if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) throw InputError(path.string() + ": truncated header");
  RowMatrix<float> m(header[0], header[1]);
  if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)))) {
    throw InputError(path.string() + ": truncated payload");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw InputError(path.string() + ": trailing bytes");
  return m;
}

std::string class_mapping_to_json(const std::vector<int>& mapping) {
  const int classes = mapping.empty() ? 0 : *std::max_element(mapping.begin(), mapping.end()) + 1;
  return nlohmann::json{{"num_classes", classes}, {"prototype_to_class", mapping}}.dump(1) + "\n";
}

#define DEPTHGROUP_INSTANTIATE(T)                                                                               \
  template void check_unit_rows<T>(const RowMatrix<T>&, const std::string&, double);                           \
  template RowMatrix<T> normalize_rows<T>(const RowMatrix<T>&);                                                 \
  template RowMatrix<T> soft_assign<T>(const RowMatrix<T>&, const RowMatrix<T>&, double);                       \
  template RowMatrix<T> sinkhorn_codes<T>(const RowMatrix<T>&, double, const SinkhornConfig&,                   \
                                          SinkhornDiagnostics*);                                                \
  template RowMatrix<T> group_average<T>(const RowMatrix<T>&, const std::vector<std::vector<int>>&);            \
  template double swap_loss<T>(const RowMatrix<T>&, const RowMatrix<T>&);                                       \
  template void raw_gradient<T>(const RowMatrix<T>&, const RowMatrix<T>&, const RowMatrix<T>&,                  \
                                const RowMatrix<T>&, double, RowMatrix<T>&, RowMatrix<T>&);                     \
  template RowMatrix<T> project_tangent<T>(const RowMatrix<T>&, const RowMatrix<T>&);                           \
  template LossResult<T> loss_gradient<T>(const RowMatrix<T>&, const RowMatrix<T>&,                             \
                                          const std::vector<std::vector<int>>&, double, const SinkhornConfig&);

DEPTHGROUP_INSTANTIATE(float)
DEPTHGROUP_INSTANTIATE(double)

#undef DEPTHGROUP_INSTANTIATE

}  // namespace depthgroup
