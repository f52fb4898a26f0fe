#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "torusdm/density.hpp"
#include "torusdm/metrics.hpp"
#include "torusdm/normalization.hpp"
#include "torusdm/reference.hpp"
#include "torusdm/spectral.hpp"

namespace torusdm {

/// Textual density descriptor used by the CLI and config files:
///   uniform | figure1 | figure2 | lacunary(b=3,p=2.2[,tol=1e-14])
///   | sepexp(<axis>;<axis>;...) | tabulated(<csv path>)
/// where an axis is a sum of <coef>c<k> and <coef>s<k> terms, e.g.
/// "0.4c1+0.12s2" for 0.4 cos(2 pi x/L) + 0.12 sin(4 pi x/L).
struct DensitySpec {
  std::string spec = "figure1";
  double L = 1.0;

  DensityModel build() const;
};

std::vector<double> log_spaced(double lo, double hi, int n);

/// Continuum-only sweep: eigenvalue (and 1-D eigenspace) error of the
/// finite-eps normalised operators against the limiting generator, with a
/// log-log rate fit per tracked eigenvalue.
struct BiasSweepConfig {
  DensitySpec density;
  std::vector<double> eps_grid = log_spaced(1e-3, 1e-1, 12);
  std::vector<NormSpec> norms = {NormSpec::standard(0.5), NormSpec::sinkhorn()};
  int k = 3;          // tracked eigenvalues past the trivial one
  int n_modes = 2001; // generator reference resolution
  int n_grid = 2048;  // continuum collocation resolution
  int sup_grid = 4096;  // evaluation grid for sup-norm eigenspace errors (1-D)
  double fit_floor = 1e-9;  // drop points saturated at reference precision
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;

  std::string canonical() const;
};

struct BiasSeries {
  NormSpec norm;
  int k = 0;  // eigenvalue index (counting multiplicity, 1-based past trivial)
  std::vector<double> eps, err_lambda;
  RateFit fit;       // over points with err >= fit_floor
  int fit_points = 0;
};

struct BiasSweepOutcome {
  std::vector<BiasSeries> series;
  std::string csv_path, rates_path, plot_path, summary_path;

  const BiasSeries& find(const NormSpec& n, int k) const;
};

BiasSweepOutcome run_bias_sweep(const BiasSweepConfig& cfg);

/// Sampled sweep over (M, eps, trial): eigenspace-E1 error of the discrete
/// operators against the continuum-eps reference (variance error) and the
/// generator reference (total error), in L^2(rho^M).
struct VarianceSweepConfig {
  DensitySpec density{"figure2", 1.0};
  std::vector<double> eps_grid = {0.05};
  std::vector<int> M_list = {250, 1000, 4000};
  int trials = 10;
  std::vector<NormSpec> norms = {NormSpec::standard(0.5), NormSpec::sinkhorn()};
  int n_modes = 2001;
  int n_grid = 2048;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  std::string canonical() const;
};

struct VarianceRow {
  int M = 0;
  double eps = 0.0;
  int trial = 0;
  NormSpec norm;
  double m_eff = 0.0;
  double var_err = 0.0;    // vs continuum-eps reference
  double total_err = 0.0;  // vs generator reference
};

struct VarianceSweepOutcome {
  std::vector<VarianceRow> rows;
  std::string trials_path, meff_path, eps_path, plot_path, summary_path;

  double median_var_err(int M, double eps, const NormSpec& norm) const;
};

VarianceSweepOutcome run_variance_sweep(const VarianceSweepConfig& cfg);

/// Residual traces of plain Sinkhorn iteration and ASSA from the same kernel
/// matrix, with iteration counts to the target residual and the empirical
/// tail contraction factor.
struct AssaTraceConfig {
  bool euclidean_gaussian = true;  // the M=3000, d=3, eps=0.5 normal sample
  DensitySpec density{"uniform", 1.0};  // used when euclidean_gaussian=false
  int M = 3000;
  int gauss_dim = 3;
  double eps = 0.5;
  double target = 1e-13;  // per-entry residual: raw l2 targets are sqrt(M) larger
  int assa_max_iter = 2000;
  int plain_max_iter = 50000;
  std::string out_dir = "out";
  std::uint64_t seed = 2;
  int threads = 1;

  std::string canonical() const;
};

struct AssaTraceOutcome {
  SinkhornReport assa_report;   // raw l2 residuals
  SinkhornReport plain_report;
  SinkhornReport assa_report_normalized;   // residuals divided by sqrt(M)
  SinkhornReport plain_report_normalized;  // (per-entry scale, as in the CSV)
  int assa_iters_to_target = -1;
  int plain_iters_to_target = -1;
  double assa_tail_contraction = 0.0;
  double init_log_error = 0.0;       // ||log(u0/u*)||_inf, ASSA init
  double theoretical_bound = 0.0;    // NaN when hypotheses fail
  std::string trace_path, plot_path, summary_path;
};

AssaTraceOutcome run_assa_trace(const AssaTraceConfig& cfg);

/// Diffusion-map spectrum of a user-supplied point file (headerless CSV,
/// one point per row).
struct SpectrumConfig {
  std::string input_csv;
  bool euclidean = false;
  double L = 1.0;
  double eps = 0.01;
  NormSpec norm = NormSpec::sinkhorn();
  int k = 6;
  bool with_vectors = true;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;

  std::string canonical() const;
};

struct SpectrumOutcome {
  SpectralResult result;
  SinkhornReport sinkhorn_report;  // valid for the sinkhorn norm
  std::string json_path, csv_path, report_path;
};

SpectrumOutcome run_spectrum(const SpectrumConfig& cfg);

/// Strict headerless CSV reader for point files (consistent row widths).
Eigen::MatrixXd read_points_csv(const std::string& path);

}  // namespace torusdm
