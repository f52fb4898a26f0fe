#include "torusdm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "torusdm/io.hpp"
#include "torusdm/rng.hpp"

namespace torusdm {

namespace fs = std::filesystem;

namespace {

std::uint64_t config_hash(const std::string& canonical) {
  return fnv1a(canonical.data(), canonical.size());
}

std::string out_file(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open output file " + path);
  return os;
}

void set_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

// ---- density spec parsing ----------------------------------------------

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// "b=3,p=2.2,tol=1e-14" -> map
std::map<std::string, double> parse_kv(const std::string& inside) {
  std::map<std::string, double> kv;
  std::stringstream ss(inside);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trimmed(item);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("density: expected key=value in '" + item + "'");
    char* end = nullptr;
    const std::string val = trimmed(item.substr(eq + 1));
    const double v = std::strtod(val.c_str(), &end);
    if (end != val.c_str() + val.size())
      throw std::invalid_argument("density: bad number '" + val + "'");
    kv[trimmed(item.substr(0, eq))] = v;
  }
  return kv;
}

// sum of <coef>c<k> / <coef>s<k> terms, e.g. "0.4c1+0.12s2-0.1c3"
TrigSeries parse_axis_poly(const std::string& text, double L) {
  TrigSeries f;
  f.L = L;
  int max_k = 0;
  struct Term {
    double coef;
    bool is_sin;
    int k;
  };
  std::vector<Term> terms;
  const char* p = text.c_str();
  while (*p) {
    while (*p == ' ' || *p == '+') ++p;
    if (!*p) break;
    char* end = nullptr;
    double coef = std::strtod(p, &end);
    if (end == p) {
      if (*p == '-') {
        coef = -1.0;
        ++p;
      } else {
        coef = 1.0;
      }
    } else {
      p = end;
    }
    while (*p == ' ') ++p;
    if (*p != 'c' && *p != 's')
      throw std::invalid_argument("density axis: expected c<k> or s<k> in '" +
                                  text + "'");
    const bool is_sin = (*p == 's');
    ++p;
    const long k = std::strtol(p, &end, 10);
    if (end == p || k < 1)
      throw std::invalid_argument("density axis: bad wavenumber in '" + text + "'");
    p = end;
    terms.push_back({coef, is_sin, static_cast<int>(k)});
    max_k = std::max(max_k, static_cast<int>(k));
  }
  if (terms.empty())
    throw std::invalid_argument("density axis: empty polynomial '" + text + "'");
  f.acos.setZero(max_k);
  f.bsin.setZero(max_k);
  for (const auto& t : terms)
    (t.is_sin ? f.bsin : f.acos)[t.k - 1] += t.coef;
  return f;
}

}  // namespace

DensityModel DensitySpec::build() const {
  const std::string s = trimmed(spec);
  if (s == "figure1") return DensityModel::figure1();
  if (s == "figure2") return DensityModel::figure2();
  if (s == "uniform") return DensityModel::uniform(TorusDomain(1, L));
  const auto open = s.find('(');
  if (open != std::string::npos && s.back() == ')') {
    const std::string head = trimmed(s.substr(0, open));
    const std::string inside = s.substr(open + 1, s.size() - open - 2);
    if (head == "uniform") {
      const auto kv = parse_kv(inside);
      const int d = kv.count("d") ? static_cast<int>(kv.at("d")) : 1;
      return DensityModel::uniform(TorusDomain(d, L));
    }
    if (head == "lacunary") {
      const auto kv = parse_kv(inside);
      if (!kv.count("b") || !kv.count("p"))
        throw std::invalid_argument("density: lacunary needs b= and p=");
      const double tol = kv.count("tol") ? kv.at("tol") : 1e-14;
      return DensityModel::cosine_lacunary(L, kv.at("p"), kv.at("b"), tol);
    }
    if (head == "sepexp") {
      std::vector<TrigSeries> axes;
      std::stringstream ss(inside);
      std::string part;
      while (std::getline(ss, part, ';'))
        axes.push_back(parse_axis_poly(trimmed(part), L));
      const TorusDomain dom(static_cast<int>(axes.size()), L);
      return DensityModel::separable_exp(dom, std::move(axes));
    }
    if (head == "tabulated") {
      const Eigen::MatrixXd vals = read_points_csv(trimmed(inside));
      if (vals.cols() != 1)
        throw std::invalid_argument("density: tabulated file must have one column");
      return DensityModel::tabulated(L, vals.col(0));
    }
  }
  throw std::invalid_argument("unknown density spec '" + spec + "'");
}

std::vector<double> log_spaced(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi > lo))
    throw std::invalid_argument("log_spaced: bad range");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = std::pow(10.0, std::log10(lo) +
                                (std::log10(hi) - std::log10(lo)) * i /
                                    std::max(1, n - 1));
  return out;
}

Eigen::MatrixXd read_points_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open input file " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trimmed(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell = trimmed(cell);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
        throw std::runtime_error("malformed CSV at line " +
                                 std::to_string(lineno) + " of " + path);
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("inconsistent row width at line " +
                               std::to_string(lineno) + " of " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty input file " + path);
  Eigen::MatrixXd out(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.front().size(); ++j)
      out(i, j) = rows[i][j];
  return out;
}

// ---- shared sweep plumbing ----------------------------------------------

namespace {

GeneratorKind generator_kind_for(const NormSpec& norm) {
  return norm.kind == WeightKind::Sinkhorn ? GeneratorKind::Langevin
                                           : GeneratorKind::Standard;
}

double effective_alpha(const NormSpec& norm) {
  return norm.kind == WeightKind::Sinkhorn ? 0.5 : norm.alpha;
}

// flatten cluster bases in eigenvalue order
std::vector<const RefEigenfunction*> flatten_basis(const ReferenceEigendata& r) {
  std::vector<const RefEigenfunction*> out;
  for (const auto& c : r.clusters)
    for (const auto& b : c.basis) out.push_back(&b);
  return out;
}

ReferenceEigendata build_generator_reference(const DensityModel& model,
                                             const NormSpec& norm, int n_eigs,
                                             int n_modes) {
  const GeneratorKind gk = generator_kind_for(norm);
  const int per_axis = model.dim() == 1 ? n_eigs : n_eigs + 2;
  std::vector<ReferenceEigendata> axes;
  for (int a = 0; a < model.dim(); ++a) {
    axes.push_back(generator_reference(model.axis(a), per_axis, gk, norm.alpha,
                                       n_modes));
    axes.back().density_desc = model.describe();
  }
  ReferenceEigendata ref =
      model.dim() == 1 ? axes[0] : tensor_reference(axes, n_eigs);
  ref.density_desc = model.describe();
  return ref;
}

ReferenceEigendata build_continuum_reference(const DensityModel& model,
                                             const NormSpec& norm, int n_eigs,
                                             double eps, int n_grid) {
  const int per_axis = model.dim() == 1 ? n_eigs : n_eigs + 2;
  std::vector<ReferenceEigendata> axes;
  for (int a = 0; a < model.dim(); ++a) {
    axes.push_back(
        continuum_reference(model.axis(a), per_axis, eps, norm, n_grid));
    axes.back().density_desc = model.describe();
  }
  ReferenceEigendata ref =
      model.dim() == 1 ? axes[0] : tensor_reference(axes, n_eigs);
  ref.density_desc = model.describe();
  return ref;
}

void warn_eps_range(const std::vector<double>& eps_grid, double L) {
  for (const double e : eps_grid)
    if (e > 0.25 * L * L)
      std::cerr << "warning: eps = " << e << " exceeds L^2/4 = " << 0.25 * L * L
                << "; the kernel is nearly flat at this bandwidth\n";
}

}  // namespace

// ---- bias sweep ----------------------------------------------------------

std::string BiasSweepConfig::canonical() const {
  std::ostringstream os;
  os << "bias-sweep|density=" << density.spec << "|L=" << fmt17(density.L)
     << "|eps=";
  for (const double e : eps_grid) os << fmt17(e) << ",";
  os << "|norms=";
  for (const auto& n : norms) os << n.name() << ",";
  os << "|k=" << k << "|n_modes=" << n_modes << "|n_grid=" << n_grid
     << "|sup_grid=" << sup_grid << "|fit_floor=" << fmt17(fit_floor)
     << "|seed=" << seed;
  return os.str();
}

const BiasSeries& BiasSweepOutcome::find(const NormSpec& n, int k) const {
  for (const auto& s : series)
    if (s.k == k && s.norm.kind == n.kind &&
        (n.kind == WeightKind::Sinkhorn || s.norm.alpha == n.alpha))
      return s;
  throw std::out_of_range("BiasSweepOutcome: no such series");
}

BiasSweepOutcome run_bias_sweep(const BiasSweepConfig& cfg) {
  if (cfg.eps_grid.empty())
    throw std::invalid_argument("bias-sweep: empty eps grid");
  if (cfg.k < 1) throw std::invalid_argument("bias-sweep: k must be >= 1");
  set_threads(cfg.threads);
  const DensityModel model = cfg.density.build();
  warn_eps_range(cfg.eps_grid, model.domain().L);
  const std::uint64_t chash = config_hash(cfg.canonical());
  const int n_eigs = cfg.k + 1;

  struct PointRow {
    double eps;
    NormSpec norm;
    EigenvalueErrorRow ev;
    double sub_l2 = std::nan("");
    double sub_sup_lo = std::nan("");
    double sub_sup_hi = std::nan("");
  };
  std::vector<PointRow> all_rows;

  BiasSweepOutcome out;
  std::map<double, ReferenceEigendata> gen_cache;  // by effective alpha
  for (const auto& norm : cfg.norms) {
    auto found = gen_cache.find(effective_alpha(norm));
    if (found == gen_cache.end())
      found = gen_cache
                  .emplace(effective_alpha(norm),
                           build_generator_reference(model, norm, n_eigs,
                                                     cfg.n_modes))
                  .first;
    const ReferenceEigendata& gen_ref = found->second;
    const auto ref_lm = gen_ref.lambda_mult();
    const auto gen_flat = flatten_basis(gen_ref);

    // per-eps error rows, parallel over the grid
    const int ne = static_cast<int>(cfg.eps_grid.size());
    std::vector<std::vector<PointRow>> per_eps(ne);
    std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic)
    for (int ei = 0; ei < ne; ++ei) {
      try {
      const double eps = cfg.eps_grid[ei];
      const ReferenceEigendata cont =
          build_continuum_reference(model, norm, n_eigs, eps, cfg.n_grid);
      const auto rows =
          eigenvalue_errors(cont.raw_lambda, eps, ref_lm, n_eigs);
      std::vector<PointRow> local;
      // eigenspace errors per generator cluster (1-D only)
      std::map<int, std::array<double, 3>> sub_by_cluster;
      if (model.dim() == 1) {
        const auto cont_flat = flatten_basis(cont);
        Eigen::VectorXd grid(cfg.sup_grid);
        for (int i = 0; i < cfg.sup_grid; ++i)
          grid[i] = model.domain().L * i / cfg.sup_grid;
        const Eigen::MatrixXd gridm = grid;
        int pos = 0;
        for (std::size_t c = 0; c < ref_lm.size() && pos < n_eigs; ++c) {
          const int mult = ref_lm[c].second;
          if (pos + mult > static_cast<int>(cont_flat.size()) ||
              pos + mult > static_cast<int>(gen_flat.size()))
            break;
          Eigen::MatrixXd A(cfg.sup_grid, mult), B(cfg.sup_grid, mult);
          for (int m = 0; m < mult; ++m) {
            A.col(m) = cont_flat[pos + m]->eval_points(gridm);
            B.col(m) = gen_flat[pos + m]->eval_points(gridm);
          }
          const auto l2 =
              subspace_distance(A, B, SubspaceNorm::WeightedL2);
          const auto sup = subspace_distance(A, B, SubspaceNorm::SupGrid);
          sub_by_cluster[static_cast<int>(c)] = {l2.value, sup.lower, sup.upper};
          pos += mult;
        }
      }
      int cluster_of_k = 0, consumed = 0;
      for (const auto& ev : rows) {
        while (consumed + ref_lm[cluster_of_k].second <= ev.k) {
          consumed += ref_lm[cluster_of_k].second;
          ++cluster_of_k;
        }
        PointRow pr{eps, norm, ev};
        if (auto it = sub_by_cluster.find(cluster_of_k);
            it != sub_by_cluster.end()) {
          pr.sub_l2 = it->second[0];
          pr.sub_sup_lo = it->second[1];
          pr.sub_sup_hi = it->second[2];
        }
        local.push_back(pr);
      }
      per_eps[ei] = std::move(local);
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    for (auto& v : per_eps)
      for (auto& r : v) all_rows.push_back(std::move(r));

    // rate fit per eigenvalue index (1..k), skipping the trivial row
    for (int kk = 1; kk <= cfg.k; ++kk) {
      BiasSeries s;
      s.norm = norm;
      s.k = kk;
      for (int ei = 0; ei < ne; ++ei)
        for (const auto& r : per_eps[ei])
          if (r.ev.k == kk) {
            s.eps.push_back(r.eps);
            s.err_lambda.push_back(r.ev.err_lambda);
          }
      std::vector<double> fe, fv;
      for (std::size_t i = 0; i < s.eps.size(); ++i)
        if (s.err_lambda[i] >= cfg.fit_floor) {
          fe.push_back(s.eps[i]);
          fv.push_back(s.err_lambda[i]);
        }
      s.fit_points = static_cast<int>(fe.size());
      if (fe.size() >= 3) s.fit = fit_rate(fe, fv);
      out.series.push_back(std::move(s));
    }
  }

  // error table CSV
  out.csv_path = out_file(cfg.out_dir, "bias_sweep.csv");
  {
    auto os = open_out(out.csv_path);
    write_provenance(os, "bias-sweep", chash, cfg.seed);
    os << "k,eps,M,seed,normalization,err_lambda,err_lambda_tilde,"
          "err_subspace_l2,err_subspace_sup_lo,err_subspace_sup_hi\n";
    for (const auto& r : all_rows)
      os << r.ev.k << ',' << fmt17(r.eps) << ",0,0," << r.norm.name() << ','
         << fmt17(r.ev.err_lambda) << ',' << fmt17(r.ev.err_lambda_tilde) << ','
         << fmt17(r.sub_l2) << ',' << fmt17(r.sub_sup_lo) << ','
         << fmt17(r.sub_sup_hi) << '\n';
  }
  out.rates_path = out_file(cfg.out_dir, "bias_rates.csv");
  {
    auto os = open_out(out.rates_path);
    write_provenance(os, "bias-sweep", chash, cfg.seed);
    os << "normalization,k,slope,intercept,resid_rms,points_used\n";
    for (const auto& s : out.series)
      os << s.norm.name() << ',' << s.k << ',' << fmt17(s.fit.slope) << ','
         << fmt17(s.fit.intercept) << ',' << fmt17(s.fit.resid_rms) << ','
         << s.fit_points << '\n';
  }
  out.plot_path = out_file(cfg.out_dir, "bias_sweep.plt");
  {
    auto os = open_out(out.plot_path);
    os << "# gnuplot script reproducing the eigenvalue bias figure\n"
          "set logscale xy\n"
          "set xlabel 'eps'\n"
          "set ylabel '|lambda_{k,eps} - lambda_k|'\n"
          "set key left top\n"
          "set datafile separator ','\n"
          "plot \\\n";
    bool first = true;
    for (const auto& norm : cfg.norms)
      for (int kk = 1; kk <= cfg.k; ++kk) {
        if (!first) os << ", \\\n";
        first = false;
        const bool dashed = norm.kind == WeightKind::Standard;
        os << "  'bias_sweep.csv' using 2:($1==" << kk << " && strcol(5) eq '"
           << norm.name() << "' ? $6 : 1/0) with linespoints"
           << (dashed ? " dashtype 2" : "") << " title '" << norm.name()
           << " k=" << kk << "'";
      }
    os << "\n";
  }
  out.summary_path = out_file(cfg.out_dir, "bias_summary.json");
  {
    nlohmann::json j;
    j["command"] = "bias-sweep";
    j["config_hash"] = config_hash(cfg.canonical());
    j["density"] = cfg.density.spec;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : out.series)
      arr.push_back({{"normalization", s.norm.name()},
                     {"k", s.k},
                     {"slope", s.fit.slope},
                     {"points_used", s.fit_points}});
    j["rates"] = arr;
    auto os = open_out(out.summary_path);
    os << j.dump(2) << '\n';
  }
  return out;
}

// ---- variance sweep -------------------------------------------------------

std::string VarianceSweepConfig::canonical() const {
  std::ostringstream os;
  os << "variance-sweep|density=" << density.spec << "|L=" << fmt17(density.L)
     << "|eps=";
  for (const double e : eps_grid) os << fmt17(e) << ",";
  os << "|M=";
  for (const int m : M_list) os << m << ",";
  os << "|trials=" << trials << "|norms=";
  for (const auto& n : norms) os << n.name() << ",";
  os << "|n_modes=" << n_modes << "|n_grid=" << n_grid << "|seed=" << seed;
  return os.str();
}

double VarianceSweepOutcome::median_var_err(int M, double eps,
                                            const NormSpec& norm) const {
  std::vector<double> vals;
  for (const auto& r : rows)
    if (r.M == M && r.eps == eps && r.norm.kind == norm.kind &&
        (norm.kind == WeightKind::Sinkhorn || r.norm.alpha == norm.alpha))
      vals.push_back(r.var_err);
  if (vals.empty()) throw std::out_of_range("median_var_err: no such rows");
  std::sort(vals.begin(), vals.end());
  const std::size_t n = vals.size();
  return n % 2 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
}

VarianceSweepOutcome run_variance_sweep(const VarianceSweepConfig& cfg) {
  if (cfg.eps_grid.empty() || cfg.M_list.empty() || cfg.trials < 1)
    throw std::invalid_argument("variance-sweep: empty grid");
  set_threads(cfg.threads);
  const DensityModel model = cfg.density.build();
  warn_eps_range(cfg.eps_grid, model.domain().L);
  const std::uint64_t chash = config_hash(cfg.canonical());
  const int d = model.dim();

  // references: generator (total error) and continuum-eps (variance error),
  // per normalization; E1 cluster basis with generator multiplicities
  struct RefPack {
    ReferenceEigendata gen;
    std::map<double, ReferenceEigendata> cont;  // by eps
    int mult1 = 0;
  };
  std::vector<RefPack> refs(cfg.norms.size());
  std::map<double, ReferenceEigendata> gen_cache;
  for (std::size_t ni = 0; ni < cfg.norms.size(); ++ni) {
    auto found = gen_cache.find(effective_alpha(cfg.norms[ni]));
    if (found == gen_cache.end())
      found = gen_cache
                  .emplace(effective_alpha(cfg.norms[ni]),
                           build_generator_reference(model, cfg.norms[ni], 2,
                                                     cfg.n_modes))
                  .first;
    refs[ni].gen = found->second;
    refs[ni].mult1 = refs[ni].gen.clusters.at(1).multiplicity;
    for (const double eps : cfg.eps_grid)
      refs[ni].cont.emplace(
          eps, build_continuum_reference(model, cfg.norms[ni], 2, eps, cfg.n_grid));
  }

  struct Task {
    int mi, trial;
  };
  std::vector<Task> tasks;
  for (int mi = 0; mi < static_cast<int>(cfg.M_list.size()); ++mi)
    for (int t = 0; t < cfg.trials; ++t) tasks.push_back({mi, t});

  VarianceSweepOutcome out;
  std::vector<std::vector<VarianceRow>> per_task(tasks.size());
  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic)
  for (int ti = 0; ti < static_cast<int>(tasks.size()); ++ti) {
    try {
    const auto [mi, trial] = tasks[ti];
    const int M = cfg.M_list[mi];
    std::uint64_t mixed = cfg.seed;
    mixed = fnv1a(&mi, sizeof(mi), mixed);
    mixed = fnv1a(&trial, sizeof(trial), mixed);
    const Sample sample = model.sample(M, mixed);

    std::vector<VarianceRow> local;
    for (const double eps : cfg.eps_grid) {
      const auto Kp =
          std::make_shared<const KernelMatrix>(build_kernel_matrix(sample, eps));
      for (std::size_t ni = 0; ni < cfg.norms.size(); ++ni) {
        const NormSpec& norm = cfg.norms[ni];
        WeightPair w;
        if (norm.kind == WeightKind::Sinkhorn)
          w = assa(*Kp, eps, default_assa_tau(eps, M)).weights;
        else
          w = standard_weights(*Kp, norm.alpha);
        const NormalizedOperator op = assemble_P(Kp, std::move(w));
        const int mult1 = refs[ni].mult1;
        TopkOptions topts;
        topts.block = std::max(24, 2 * (1 + mult1) + 8);
        const SpectralResult sr = eigensolve(op, 1 + mult1, topts);

        Eigen::MatrixXd computed(M, mult1);
        for (int m = 0; m < mult1; ++m) computed.col(m) = sr.vectors.col(1 + m);
        const Eigen::MatrixXd gen_vals =
            refs[ni].gen.cluster_values(1, sample.points);
        const Eigen::MatrixXd cont_vals =
            refs[ni].cont.at(eps).cluster_values(1, sample.points);

        VarianceRow row;
        row.M = M;
        row.eps = eps;
        row.trial = trial;
        row.norm = norm;
        row.m_eff = effective_sample_size(M, eps, d);
        row.var_err =
            subspace_distance(computed, cont_vals, SubspaceNorm::WeightedL2)
                .value;
        row.total_err =
            subspace_distance(computed, gen_vals, SubspaceNorm::WeightedL2)
                .value;
        local.push_back(row);
      }
    }
    per_task[ti] = std::move(local);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (auto& v : per_task)
    for (auto& r : v) out.rows.push_back(std::move(r));

  // per-trial table
  out.trials_path = out_file(cfg.out_dir, "variance_trials.csv");
  {
    auto os = open_out(out.trials_path);
    write_provenance(os, "variance-sweep", chash, cfg.seed);
    os << "M,eps,trial,normalization,m_eff,var_err,total_err\n";
    for (const auto& r : out.rows)
      os << r.M << ',' << fmt17(r.eps) << ',' << r.trial << ','
         << r.norm.name() << ',' << fmt17(r.m_eff) << ',' << fmt17(r.var_err)
         << ',' << fmt17(r.total_err) << '\n';
  }

  // aggregated panels
  auto aggregate = [&](std::ostream& os, bool by_meff) {
    os << (by_meff ? "m_eff,M,eps,normalization,var_err_mean,var_err_median\n"
                   : "eps,M,normalization,total_err_mean,total_err_median,var_"
                     "err_mean,var_err_median\n");
    for (const auto& norm : cfg.norms)
      for (const int M : cfg.M_list)
        for (const double eps : cfg.eps_grid) {
          std::vector<double> ve, te;
          for (const auto& r : out.rows)
            if (r.M == M && r.eps == eps && r.norm.kind == norm.kind &&
                (norm.kind == WeightKind::Sinkhorn ||
                 r.norm.alpha == norm.alpha)) {
              ve.push_back(r.var_err);
              te.push_back(r.total_err);
            }
          if (ve.empty()) continue;
          std::sort(ve.begin(), ve.end());
          std::sort(te.begin(), te.end());
          auto mean = [](const std::vector<double>& v) {
            double s = 0;
            for (double x : v) s += x;
            return s / v.size();
          };
          auto median = [](const std::vector<double>& v) {
            const std::size_t n = v.size();
            return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
          };
          if (by_meff)
            os << fmt17(effective_sample_size(M, eps, d)) << ',' << M << ','
               << fmt17(eps) << ',' << norm.name() << ',' << fmt17(mean(ve))
               << ',' << fmt17(median(ve)) << '\n';
          else
            os << fmt17(eps) << ',' << M << ',' << norm.name() << ','
               << fmt17(mean(te)) << ',' << fmt17(median(te)) << ','
               << fmt17(mean(ve)) << ',' << fmt17(median(ve)) << '\n';
        }
  };
  out.meff_path = out_file(cfg.out_dir, "variance_meff.csv");
  {
    auto os = open_out(out.meff_path);
    write_provenance(os, "variance-sweep", chash, cfg.seed);
    aggregate(os, true);
  }
  out.eps_path = out_file(cfg.out_dir, "variance_eps.csv");
  {
    auto os = open_out(out.eps_path);
    write_provenance(os, "variance-sweep", chash, cfg.seed);
    aggregate(os, false);
  }
  out.plot_path = out_file(cfg.out_dir, "variance_sweep.plt");
  {
    auto os = open_out(out.plot_path);
    os << "# gnuplot script for the variance-error panels\n"
          "set datafile separator ','\n"
          "set logscale xy\n"
          "set terminal push\n"
          "set xlabel 'M_eff'\nset ylabel 'L2(rho^M) error of E_1'\n"
          "plot 'variance_meff.csv' using 1:5 with points title 'variance error'\n"
          "set xlabel 'eps'\n"
          "plot 'variance_eps.csv' using 1:4 with points title 'total error'\n";
  }
  out.summary_path = out_file(cfg.out_dir, "variance_summary.json");
  {
    nlohmann::json j;
    j["command"] = "variance-sweep";
    j["config_hash"] = chash;
    j["density"] = cfg.density.spec;
    j["trials"] = cfg.trials;
    auto os = open_out(out.summary_path);
    os << j.dump(2) << '\n';
  }
  return out;
}

// ---- ASSA trace -----------------------------------------------------------

std::string AssaTraceConfig::canonical() const {
  std::ostringstream os;
  os << "assa-trace|setup="
     << (euclidean_gaussian ? "gaussian" : "torus:" + density.spec)
     << "|M=" << M << "|d=" << gauss_dim << "|eps=" << fmt17(eps)
     << "|target=" << fmt17(target) << "|seed=" << seed;
  return os.str();
}

AssaTraceOutcome run_assa_trace(const AssaTraceConfig& cfg) {
  set_threads(cfg.threads);
  const std::uint64_t chash = config_hash(cfg.canonical());

  KernelMatrix K;
  if (cfg.euclidean_gaussian) {
    SplitMix64 g = SplitMix64::substream(cfg.seed, 0);
    Eigen::MatrixXd pts(cfg.M, cfg.gauss_dim);
    for (int i = 0; i < cfg.M; ++i)
      for (int j = 0; j < cfg.gauss_dim; ++j) pts(i, j) = g.normal();
    K = build_kernel_matrix_euclidean(pts, cfg.eps);
  } else {
    const DensityModel model = cfg.density.build();
    K = build_kernel_matrix(model.sample(cfg.M, cfg.seed), cfg.eps);
  }

  AssaTraceOutcome out;
  // the residual target is per-entry (the l2 stopping quantity runs over M
  // entries, so raw tolerances scale with sqrt(M))
  const double root_M = std::sqrt(double(K.size()));
  const SinkhornResult ar =
      assa(K, cfg.eps, cfg.target * root_M / cfg.eps, cfg.assa_max_iter);
  const SinkhornResult pr =
      sinkhorn_plain(K, Eigen::VectorXd::Ones(K.size()), cfg.target * root_M,
                     cfg.plain_max_iter);
  out.assa_report = ar.report;
  out.plain_report = pr.report;
  auto normalized = [&](const SinkhornReport& rep) {
    SinkhornReport n = rep;
    for (double& r : n.residual_trace) r /= root_M;
    return n;
  };
  out.assa_report_normalized = normalized(ar.report);
  out.plain_report_normalized = normalized(pr.report);
  out.assa_iters_to_target = out.assa_report_normalized.iterations_to(cfg.target);
  out.plain_iters_to_target = out.plain_report_normalized.iterations_to(cfg.target);
  out.assa_tail_contraction = ar.report.tail_contraction(1e-4);

  // ASSA initialisation error and, when its hypotheses hold, the bound of
  // the local contraction factor.
  const Eigen::VectorXd u0 = K.row_sums().array().rsqrt();
  out.init_log_error =
      (u0.array() / ar.weights.u.array()).log().abs().maxCoeff();
  out.theoretical_bound = std::nan("");
  if (out.init_log_error < 0.1) {
    try {
      out.theoretical_bound = theoretical_contraction_bound(out.init_log_error);
    } catch (const std::domain_error&) {
    }
  }

  out.trace_path = out_file(cfg.out_dir, "assa_trace.csv");
  {
    auto os = open_out(out.trace_path);
    write_provenance(os, "assa-trace", chash, cfg.seed);
    os << "algorithm,iteration,residual\n";  // residual in L2(rho^M)
    const auto& at = out.assa_report_normalized.residual_trace;
    const auto& pt = out.plain_report_normalized.residual_trace;
    for (std::size_t i = 0; i < at.size(); ++i)
      os << "assa," << i + 1 << ',' << fmt17(at[i]) << '\n';
    for (std::size_t i = 0; i < pt.size(); ++i)
      os << "plain," << i + 1 << ',' << fmt17(pt[i]) << '\n';
  }
  out.plot_path = out_file(cfg.out_dir, "assa_trace.plt");
  {
    auto os = open_out(out.plot_path);
    os << "# gnuplot script for the Sinkhorn residual traces\n"
          "set datafile separator ','\n"
          "set logscale y\n"
          "set xlabel 'iteration'\nset ylabel 'residual'\n"
          "plot 'assa_trace.csv' using 2:(strcol(1) eq 'plain' ? $3 : 1/0) "
          "with lines title 'Sinkhorn', \\\n"
          "     'assa_trace.csv' using 2:(strcol(1) eq 'assa' ? $3 : 1/0) "
          "with lines title 'ASSA'\n";
  }
  out.summary_path = out_file(cfg.out_dir, "assa_summary.json");
  {
    nlohmann::json j;
    j["command"] = "assa-trace";
    j["config_hash"] = chash;
    j["target"] = cfg.target;
    j["assa_iterations_to_target"] = out.assa_iters_to_target;
    j["plain_iterations_to_target"] = out.plain_iters_to_target;
    j["assa_tail_contraction"] = out.assa_tail_contraction;
    j["assa_fixed_point_residual"] = ar.report.fixed_point_residual;
    j["init_log_error"] = out.init_log_error;
    if (std::isfinite(out.theoretical_bound))
      j["theoretical_contraction_bound"] = out.theoretical_bound;
    else
      j["theoretical_contraction_bound"] = nullptr;
    auto os = open_out(out.summary_path);
    os << j.dump(2) << '\n';
  }
  return out;
}

// ---- spectrum -------------------------------------------------------------

std::string SpectrumConfig::canonical() const {
  std::ostringstream os;
  os << "spectrum|input=" << input_csv << "|euclidean=" << euclidean
     << "|L=" << fmt17(L) << "|eps=" << fmt17(eps) << "|norm=" << norm.name()
     << "|k=" << k << "|vectors=" << with_vectors << "|seed=" << seed;
  return os.str();
}

SpectrumOutcome run_spectrum(const SpectrumConfig& cfg) {
  set_threads(cfg.threads);
  const std::uint64_t chash = config_hash(cfg.canonical());
  const Eigen::MatrixXd raw = read_points_csv(cfg.input_csv);
  const int M = static_cast<int>(raw.rows());
  if (cfg.k < 1 || cfg.k > M)
    throw std::invalid_argument(
        "spectrum: k must satisfy 1 <= k <= M (got k=" + std::to_string(cfg.k) +
        ", M=" + std::to_string(M) + ")");

  std::shared_ptr<const KernelMatrix> Kp;
  if (cfg.euclidean) {
    Kp = std::make_shared<const KernelMatrix>(
        build_kernel_matrix_euclidean(raw, cfg.eps));
  } else {
    const TorusDomain dom(static_cast<int>(raw.cols()), cfg.L);
    Sample s{dom, raw, cfg.seed};
    for (Eigen::Index i = 0; i < s.points.rows(); ++i)
      s.points.row(i) = wrap(dom, s.points.row(i).transpose()).transpose();
    Kp = std::make_shared<const KernelMatrix>(build_kernel_matrix(s, cfg.eps));
  }

  SpectrumOutcome out;
  WeightPair w;
  if (cfg.norm.kind == WeightKind::Sinkhorn) {
    SinkhornResult sr = assa(*Kp, cfg.eps, default_assa_tau(cfg.eps, M));
    w = std::move(sr.weights);
    out.sinkhorn_report = std::move(sr.report);
  } else {
    w = standard_weights(*Kp, cfg.norm.alpha);
  }
  const NormalizedOperator op = assemble_P(Kp, std::move(w));
  out.result = eigensolve(op, cfg.k);

  out.csv_path = out_file(cfg.out_dir, "spectrum.csv");
  {
    auto os = open_out(out.csv_path);
    write_provenance(os, "spectrum", chash, cfg.seed);
    out.result.write_csv(os);
  }
  out.json_path = out_file(cfg.out_dir, "spectrum.json");
  {
    nlohmann::json j = nlohmann::json::parse(out.result.to_json(cfg.with_vectors));
    j["command"] = "spectrum";
    j["config_hash"] = chash;
    j["input"] = cfg.input_csv;
    j["M"] = M;
    if (cfg.norm.kind == WeightKind::Sinkhorn) {
      j["sinkhorn"] = {
          {"iterations", out.sinkhorn_report.iterations},
          {"converged", out.sinkhorn_report.converged},
          {"fixed_point_residual", out.sinkhorn_report.fixed_point_residual}};
    }
    auto os = open_out(out.json_path);
    os << j.dump(2) << '\n';
  }
  out.report_path.clear();
  if (cfg.norm.kind == WeightKind::Sinkhorn) {
    out.report_path = out_file(cfg.out_dir, "spectrum_sinkhorn.csv");
    auto os = open_out(out.report_path);
    write_provenance(os, "spectrum", chash, cfg.seed);
    out.sinkhorn_report.write_csv(os);
  }
  return out;
}

}  // namespace torusdm
