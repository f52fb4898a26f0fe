#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "torusdm/density.hpp"
#include "torusdm/torus.hpp"

namespace torusdm {

enum class KernelMode { Periodic, Euclidean };

/// Dense symmetric kernel matrix K_ij = (1/M) k_eps(x_i - x_j). The 1/M
/// factor is kept inside K. Entries are never floored: underflowed pairs
/// stay exactly 0.
struct KernelMatrix {
  Eigen::MatrixXd entries;  // M x M, exactly symmetric as stored
  Eigen::MatrixXd points;   // M x d sample reference
  double eps = 0.0;
  KernelMode mode = KernelMode::Periodic;
  double L = 0.0;     // side length (periodic mode)
  int trunc_J = 0;    // image truncation used (periodic mode)
  std::uint64_t sample_hash = 0;

  int size() const { return static_cast<int>(entries.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  /// Kernel density estimate at the sample points: K * 1.
  Eigen::VectorXd row_sums() const { return entries.rowwise().sum(); }
};

std::uint64_t hash_points(const Eigen::MatrixXd& points);

/// Periodic-mode assembly; the truncation radius is selected by
/// choose_truncation at kKernelTruncationTol.
KernelMatrix build_kernel_matrix(const Sample& sample, double eps);

/// Euclidean-mode assembly (plain Gaussian), for samples on R^d.
KernelMatrix build_kernel_matrix_euclidean(const Eigen::MatrixXd& points,
                                           double eps);

/// r_i = (1/M) k_eps(x - x_i); evaluating at x = x_j reproduces row j of K.
Eigen::VectorXd out_of_sample_row(const KernelMatrix& K,
                                  const Eigen::VectorXd& x);

/// Binary cache, little-endian layout:
///   magic "TDMKCX01" | u32 mode | u64 M | u32 d | f64 eps | f64 L |
///   i32 trunc_J | u64 sample_hash | M*M f64 entries (row-major) |
///   M*d f64 points (row-major)
void save_kernel_cache(const std::string& path, const KernelMatrix& K);
KernelMatrix load_kernel_cache(const std::string& path);

}  // namespace torusdm
