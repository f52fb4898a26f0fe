#include "torusdm/kernel.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <vector>

#include "torusdm/rng.hpp"

namespace torusdm {

std::uint64_t hash_points(const Eigen::MatrixXd& points) {
  const auto rows = points.rows(), cols = points.cols();
  std::uint64_t h = fnv1a(&rows, sizeof(rows));
  h = fnv1a(&cols, sizeof(cols), h);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double v = points(i, j);
      h = fnv1a(&v, sizeof(v), h);
    }
  return h;
}

Eigen::VectorXd KernelMatrix::apply(const Eigen::VectorXd& v) const {
  if (v.size() != entries.rows())
    throw std::invalid_argument("KernelMatrix::apply: dimension mismatch");
  return entries * v;
}

namespace {

// Fill the upper triangle with pair_value and mirror, so K is exactly
// symmetric as stored.
template <typename PairFn>
KernelMatrix assemble(const Eigen::MatrixXd& points, double eps,
                      KernelMode mode, double L, int trunc_J, PairFn&& pair_value) {
  const int M = static_cast<int>(points.rows());
  if (M == 0) throw std::invalid_argument("build_kernel_matrix: empty sample");
  if (!(eps > 0.0)) throw std::invalid_argument("build_kernel_matrix: eps must be positive");
  KernelMatrix K;
  K.entries.resize(M, M);
  K.points = points;
  K.eps = eps;
  K.mode = mode;
  K.L = L;
  K.trunc_J = trunc_J;
  K.sample_hash = hash_points(points);
  const double inv_M = 1.0 / M;
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < M; ++i) {
    for (int j = i; j < M; ++j)
      K.entries(i, j) = inv_M * pair_value(points.row(i), points.row(j));
  }
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < i; ++j) K.entries(i, j) = K.entries(j, i);
  return K;
}

}  // namespace

KernelMatrix build_kernel_matrix(const Sample& sample, double eps) {
  const TorusDomain& dom = sample.domain;
  const int J = choose_truncation(dom, eps, kKernelTruncationTol);
  const double norm = std::pow(2.0 * M_PI * eps, -0.5 * dom.d);
  auto pair = [&](const auto& xi, const auto& xj) {
    double prod = norm;
    for (int a = 0; a < dom.d; ++a) {
      double t = std::fmod(xj[a] - xi[a], dom.L);
      if (t <= -0.5 * dom.L) t += dom.L;
      if (t > 0.5 * dom.L) t -= dom.L;
      // |t| keeps the image sum bitwise identical for both orientations
      prod *= detail::periodized_axis_sum(std::abs(t), dom.L, eps, J);
    }
    return prod;
  };
  return assemble(sample.points, eps, KernelMode::Periodic, dom.L, J, pair);
}

KernelMatrix build_kernel_matrix_euclidean(const Eigen::MatrixXd& points,
                                           double eps) {
  const int d = static_cast<int>(points.cols());
  const double norm = std::pow(2.0 * M_PI * eps, -0.5 * d);
  auto pair = [&](const auto& xi, const auto& xj) {
    const double r2 = (xj - xi).squaredNorm();
    return norm * std::exp(-r2 / (2.0 * eps));
  };
  return assemble(points, eps, KernelMode::Euclidean, 0.0, 0, pair);
}

Eigen::VectorXd out_of_sample_row(const KernelMatrix& K,
                                  const Eigen::VectorXd& x) {
  const int M = K.size(), d = K.dim();
  if (x.size() != d)
    throw std::invalid_argument("out_of_sample_row: dimension mismatch");
  Eigen::VectorXd r(M);
  const double inv_M = 1.0 / M;
  if (K.mode == KernelMode::Periodic) {
    const double norm = std::pow(2.0 * M_PI * K.eps, -0.5 * d);
    for (int i = 0; i < M; ++i) {
      double prod = norm;
      for (int a = 0; a < d; ++a) {
        double t = std::fmod(x[a] - K.points(i, a), K.L);
        if (t <= -0.5 * K.L) t += K.L;
        if (t > 0.5 * K.L) t -= K.L;
        prod *= detail::periodized_axis_sum(std::abs(t), K.L, K.eps, K.trunc_J);
      }
      r[i] = inv_M * prod;
    }
  } else {
    const double norm = std::pow(2.0 * M_PI * K.eps, -0.5 * d);
    for (int i = 0; i < M; ++i) {
      const double r2 = (x.transpose() - K.points.row(i)).squaredNorm();
      r[i] = inv_M * norm * std::exp(-r2 / (2.0 * K.eps));
    }
  }
  return r;
}

namespace {
constexpr char kMagic[8] = {'T', 'D', 'M', 'K', 'C', 'X', '0', '1'};

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};

template <typename T>
void put(std::FILE* f, const T& v) {
  if (std::fwrite(&v, sizeof(T), 1, f) != 1)
    throw std::runtime_error("kernel cache: write failed");
}
template <typename T>
T get(std::FILE* f) {
  T v;
  if (std::fread(&v, sizeof(T), 1, f) != 1)
    throw std::runtime_error("kernel cache: truncated file");
  return v;
}
}  // namespace

void save_kernel_cache(const std::string& path, const KernelMatrix& K) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("kernel cache: cannot open " + path);
  if (std::fwrite(kMagic, 1, 8, f.get()) != 8)
    throw std::runtime_error("kernel cache: write failed");
  put<std::uint32_t>(f.get(), K.mode == KernelMode::Periodic ? 0u : 1u);
  put<std::uint64_t>(f.get(), static_cast<std::uint64_t>(K.size()));
  put<std::uint32_t>(f.get(), static_cast<std::uint32_t>(K.dim()));
  put<double>(f.get(), K.eps);
  put<double>(f.get(), K.L);
  put<std::int32_t>(f.get(), K.trunc_J);
  put<std::uint64_t>(f.get(), K.sample_hash);
  const int M = K.size(), d = K.dim();
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) put<double>(f.get(), K.entries(i, j));
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < d; ++j) put<double>(f.get(), K.points(i, j));
}

KernelMatrix load_kernel_cache(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("kernel cache: cannot open " + path);
  char magic[8];
  if (std::fread(magic, 1, 8, f.get()) != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("kernel cache: bad magic/version in " + path);
  KernelMatrix K;
  const auto mode = get<std::uint32_t>(f.get());
  if (mode > 1) throw std::runtime_error("kernel cache: unknown mode");
  K.mode = mode == 0 ? KernelMode::Periodic : KernelMode::Euclidean;
  const auto M = static_cast<Eigen::Index>(get<std::uint64_t>(f.get()));
  const auto d = static_cast<Eigen::Index>(get<std::uint32_t>(f.get()));
  K.eps = get<double>(f.get());
  K.L = get<double>(f.get());
  K.trunc_J = get<std::int32_t>(f.get());
  K.sample_hash = get<std::uint64_t>(f.get());
  K.entries.resize(M, M);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < M; ++j) K.entries(i, j) = get<double>(f.get());
  K.points.resize(M, d);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < d; ++j) K.points(i, j) = get<double>(f.get());
  if (hash_points(K.points) != K.sample_hash)
    throw std::runtime_error("kernel cache: sample hash mismatch");
  return K;
}

}  // namespace torusdm
