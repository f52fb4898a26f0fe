// Command line front end: bias-sweep, variance-sweep, assa-trace, spectrum.
// Options may come from the command line or from a TOML-style config file
// with one [section] per subcommand (see --config).

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "torusdm/experiment.hpp"
#include "torusdm/io.hpp"

namespace {

torusdm::NormSpec parse_norm(const std::string& text) {
  if (text == "sinkhorn") return torusdm::NormSpec::sinkhorn();
  const std::string prefix = "standard:";
  if (text.rfind(prefix, 0) == 0)
    return torusdm::NormSpec::standard(std::stod(text.substr(prefix.size())));
  if (text == "standard") return torusdm::NormSpec::standard(0.5);
  throw CLI::ValidationError("normalization must be 'sinkhorn', 'standard' or "
                             "'standard:<alpha>', got '" +
                             text + "'");
}

std::vector<torusdm::NormSpec> parse_norms(const std::vector<std::string>& v) {
  std::vector<torusdm::NormSpec> out;
  for (const auto& s : v) out.push_back(parse_norm(s));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral diffusion maps on the flat torus"};
  app.set_version_flag("--version", std::string("torusdm ") + torusdm::kToolVersion);
  app.set_config("--config", "", "read options from a TOML-style file with "
                                 "[subcommand] sections");
  app.require_subcommand(1);

  // shared option state
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int trials = 10;
  int threads = 1;
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", seed, "base seed for all random streams")
      ->capture_default_str();
  app.add_option("--trials", trials, "trials per configuration (variance-sweep)")
      ->capture_default_str();
  app.add_option("--threads", threads,
                 "worker threads for sweeps (trials/grid points run "
                 "concurrently; per-trial math is single threaded)")
      ->capture_default_str();

  // ---- bias-sweep
  auto* bias = app.add_subcommand(
      "bias-sweep", "eigenvalue bias of the continuum operators vs the "
                    "limiting generator, with log-log rate fits");
  torusdm::BiasSweepConfig bias_cfg;
  std::string bias_density = "figure1";
  double bias_L = 1.0;
  double bias_eps_lo = 1e-3, bias_eps_hi = 1e-1;
  int bias_eps_n = 12;
  std::vector<std::string> bias_norms = {"standard:0.5", "sinkhorn"};
  bias->add_option("--density", bias_density, "density spec")->capture_default_str();
  bias->add_option("--length", bias_L, "torus side length")->capture_default_str();
  bias->add_option("--eps-min", bias_eps_lo, "smallest eps")->capture_default_str();
  bias->add_option("--eps-max", bias_eps_hi, "largest eps")->capture_default_str();
  bias->add_option("--eps-count", bias_eps_n, "log-spaced eps points")
      ->capture_default_str();
  bias->add_option("--norm", bias_norms, "normalizations to sweep")
      ->capture_default_str();
  bias->add_option("--eigs", bias_cfg.k, "tracked eigenvalues past the trivial one")
      ->capture_default_str();
  bias->add_option("--modes", bias_cfg.n_modes, "generator reference modes (odd)")
      ->capture_default_str();
  bias->add_option("--grid", bias_cfg.n_grid, "continuum collocation grid")
      ->capture_default_str();
  bias->add_option("--fit-floor", bias_cfg.fit_floor,
                   "errors below this are excluded from the rate fit")
      ->capture_default_str();

  // ---- variance-sweep
  auto* var = app.add_subcommand(
      "variance-sweep", "sampled eigenspace-E1 error against continuum and "
                        "generator references");
  torusdm::VarianceSweepConfig var_cfg;
  std::string var_density = "figure2";
  double var_L = 1.0;
  std::vector<double> var_eps = {0.05};
  std::vector<int> var_M = {250, 1000, 4000};
  std::vector<std::string> var_norms = {"standard:0.5", "sinkhorn"};
  var->add_option("--density", var_density, "density spec (separable)")
      ->capture_default_str();
  var->add_option("--length", var_L, "torus side length")->capture_default_str();
  var->add_option("--eps", var_eps, "eps values")->capture_default_str();
  var->add_option("--samples", var_M, "sample sizes M")->capture_default_str();
  var->add_option("--norm", var_norms, "normalizations")->capture_default_str();
  var->add_option("--modes", var_cfg.n_modes, "generator reference modes")
      ->capture_default_str();
  var->add_option("--grid", var_cfg.n_grid, "continuum collocation grid")
      ->capture_default_str();

  // ---- assa-trace
  auto* tr = app.add_subcommand(
      "assa-trace", "residual traces of plain Sinkhorn iteration vs ASSA");
  torusdm::AssaTraceConfig tr_cfg;
  std::string tr_setup = "gaussian";
  std::string tr_density = "uniform";
  double tr_L = 1.0;
  tr->add_option("--setup", tr_setup,
                 "'gaussian' (normal sample in R^d) or 'torus'")
      ->capture_default_str();
  tr->add_option("--density", tr_density, "torus density (setup=torus)")
      ->capture_default_str();
  tr->add_option("--length", tr_L, "torus side length")->capture_default_str();
  tr->add_option("--points", tr_cfg.M, "sample size")->capture_default_str();
  tr->add_option("--dim", tr_cfg.gauss_dim, "gaussian dimension")
      ->capture_default_str();
  tr->add_option("--eps", tr_cfg.eps, "kernel timestep")->capture_default_str();
  tr->add_option("--target", tr_cfg.target, "residual target")
      ->capture_default_str();

  // ---- spectrum
  auto* sp = app.add_subcommand(
      "spectrum", "diffusion-map eigendata of a point file (headerless CSV)");
  torusdm::SpectrumConfig sp_cfg;
  std::string sp_norm = "sinkhorn";
  sp->add_option("--input", sp_cfg.input_csv, "input CSV, one point per row")
      ->required();
  sp->add_flag("--euclidean", sp_cfg.euclidean,
               "treat points as living in R^d instead of the torus");
  sp->add_option("--length", sp_cfg.L, "torus side length")->capture_default_str();
  sp->add_option("--eps", sp_cfg.eps, "kernel timestep")->capture_default_str();
  sp->add_option("--norm", sp_norm, "normalization")->capture_default_str();
  sp->add_option("--eigs", sp_cfg.k, "number of eigenpairs")->capture_default_str();
  sp->add_flag("!--no-vectors", sp_cfg.with_vectors,
               "omit eigenvectors from the JSON output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bias->parsed()) {
      bias_cfg.density = {bias_density, bias_L};
      bias_cfg.eps_grid = torusdm::log_spaced(bias_eps_lo, bias_eps_hi, bias_eps_n);
      bias_cfg.norms = parse_norms(bias_norms);
      bias_cfg.out_dir = out_dir;
      bias_cfg.seed = seed;
      bias_cfg.threads = threads;
      const auto out = torusdm::run_bias_sweep(bias_cfg);
      for (const auto& s : out.series)
        std::printf("%-18s k=%d slope=%.4f (%d points)\n", s.norm.name().c_str(),
                    s.k, s.fit.slope, s.fit_points);
      std::printf("wrote %s\n", out.csv_path.c_str());
    } else if (var->parsed()) {
      var_cfg.density = {var_density, var_L};
      var_cfg.eps_grid = var_eps;
      var_cfg.M_list = var_M;
      var_cfg.norms = parse_norms(var_norms);
      var_cfg.trials = trials;
      var_cfg.out_dir = out_dir;
      var_cfg.seed = seed;
      var_cfg.threads = threads;
      const auto out = torusdm::run_variance_sweep(var_cfg);
      std::printf("wrote %s (%zu trial rows)\n", out.trials_path.c_str(),
                  out.rows.size());
    } else if (tr->parsed()) {
      if (tr_setup != "gaussian" && tr_setup != "torus")
        throw std::invalid_argument("--setup must be 'gaussian' or 'torus'");
      tr_cfg.euclidean_gaussian = tr_setup == "gaussian";
      tr_cfg.density = {tr_density, tr_L};
      tr_cfg.out_dir = out_dir;
      tr_cfg.seed = seed;
      tr_cfg.threads = threads;
      const auto out = torusdm::run_assa_trace(tr_cfg);
      std::printf("assa: %d iterations to %.1e, plain: %d\n",
                  out.assa_iters_to_target, tr_cfg.target,
                  out.plain_iters_to_target);
      std::printf("wrote %s\n", out.trace_path.c_str());
    } else if (sp->parsed()) {
      sp_cfg.norm = parse_norm(sp_norm);
      sp_cfg.out_dir = out_dir;
      sp_cfg.seed = seed;
      sp_cfg.threads = threads;
      const auto out = torusdm::run_spectrum(sp_cfg);
      std::printf("wrote %s\n", out.json_path.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
