#include "torusdm/density.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "torusdm/rng.hpp"

namespace torusdm {

namespace {
constexpr int kTableSize = 1024;
constexpr double kQuantileTolX = 1e-12;
}  // namespace

AxisDensity AxisDensity::uniform(double L) {
  AxisDensity a;
  a.kind_ = Kind::Uniform;
  a.L_ = L;
  a.Z_ = L;  // unnormalised formula is the constant 1
  a.build_table();
  return a;
}

AxisDensity AxisDensity::cosine_lacunary(double L, double p, double b,
                                         double trunc_tol) {
  if (!(p > 1.0) || !(b > 1.0))
    throw std::invalid_argument("cosine_lacunary: need p > 1 and b > 1");
  AxisDensity a;
  a.kind_ = Kind::Lacunary;
  a.L_ = L;
  a.Z_ = L;  // cosine terms integrate to zero
  a.lac_amp_ = 0.5 * (1.0 - std::pow(b, -p));
  double freq = 1.0;
  for (int j = 1;; ++j) {
    const double q = std::pow(b, -p * j);
    if (q < trunc_tol) break;
    freq *= b;
    a.lac_q_.push_back(q);
    a.lac_om_.push_back(2.0 * M_PI * freq / L);
    if (j > 200) throw std::runtime_error("cosine_lacunary: series does not truncate");
  }
  a.build_table();
  return a;
}

AxisDensity AxisDensity::exp_of(const TrigSeries& f, int quad_points) {
  AxisDensity a;
  a.kind_ = Kind::Exp;
  a.L_ = f.L;
  a.f_ = f;
  Eigen::VectorXd vals(quad_points);
  for (int i = 0; i < quad_points; ++i)
    vals[i] = std::exp(f.eval(f.L * i / quad_points));
  a.Z_ = vals.mean() * f.L;
  // Spectral interpolant of the normalised density, used for the CDF.
  a.rho_series_ = trig_from_grid(Eigen::VectorXd(vals / a.Z_), f.L).truncated();
  a.has_series_ = true;
  a.build_table();
  return a;
}

AxisDensity AxisDensity::tabulated(double L, const Eigen::VectorXd& values) {
  if (values.size() < 4) throw std::invalid_argument("tabulated: too few values");
  if (values.minCoeff() <= 0.0)
    throw std::invalid_argument("tabulated: values must be positive");
  AxisDensity a;
  a.kind_ = Kind::Series;
  a.L_ = L;
  a.Z_ = values.mean() * L;
  a.rho_series_ = trig_from_grid(Eigen::VectorXd(values / a.Z_), L).truncated();
  a.has_series_ = true;
  a.build_table();
  return a;
}

double AxisDensity::eval_unnormalized(double x) const {
  switch (kind_) {
    case Kind::Uniform:
      return 1.0;
    case Kind::Lacunary: {
      double s = 1.0;
      for (std::size_t j = 0; j < lac_q_.size(); ++j)
        s += lac_amp_ * lac_q_[j] * std::cos(lac_om_[j] * x);
      return s;
    }
    case Kind::Exp:
      return std::exp(f_.eval(x));
    case Kind::Series:
      return rho_series_.eval(x) * Z_;
  }
  return 0.0;
}

double AxisDensity::eval(double x) const {
  const double v = eval_unnormalized(x) / Z_;
  if (!(v > 0.0))
    throw std::runtime_error("AxisDensity: non-positive density value");
  return v;
}

double AxisDensity::dlog(double x) const {
  switch (kind_) {
    case Kind::Uniform:
      return 0.0;
    case Kind::Lacunary: {
      double num = 0.0;
      for (std::size_t j = 0; j < lac_q_.size(); ++j)
        num -= lac_amp_ * lac_q_[j] * lac_om_[j] * std::sin(lac_om_[j] * x);
      return num / eval_unnormalized(x);
    }
    case Kind::Exp:
      return f_.deriv(x);
    case Kind::Series:
      return rho_series_.deriv(x) / rho_series_.eval(x);
  }
  return 0.0;
}

double AxisDensity::cdf(double x) const {
  switch (kind_) {
    case Kind::Uniform:
      return x / L_;
    case Kind::Lacunary: {
      double s = x / L_;
      for (std::size_t j = 0; j < lac_q_.size(); ++j)
        s += lac_amp_ * lac_q_[j] * std::sin(lac_om_[j] * x) / (lac_om_[j] * L_);
      return s;
    }
    case Kind::Exp:
    case Kind::Series:
      return rho_series_.integral0(x);
  }
  return 0.0;
}

void AxisDensity::build_table() {
  cdf_table_.resize(kTableSize + 1);
  for (int i = 0; i <= kTableSize; ++i)
    cdf_table_[i] = cdf(L_ * i / kTableSize);
}

double AxisDensity::quantile(double u) const {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return std::nextafter(L_, 0.0);
  // bracket from the table, then bisect
  int lo = 0, hi = kTableSize;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (cdf_table_[mid] < u ? lo : hi) = mid;
  }
  double a = L_ * lo / kTableSize, b = L_ * hi / kTableSize;
  while (b - a > kQuantileTolX) {
    const double mid = 0.5 * (a + b);
    (cdf(mid) < u ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

DensityModel DensityModel::uniform(const TorusDomain& domain) {
  std::vector<AxisDensity> axes(domain.d, AxisDensity::uniform(domain.L));
  return DensityModel(domain, DensityKind::Uniform, std::move(axes));
}

DensityModel DensityModel::cosine_lacunary(double L, double p, double b,
                                           double trunc_tol) {
  std::vector<AxisDensity> axes{AxisDensity::cosine_lacunary(L, p, b, trunc_tol)};
  return DensityModel(TorusDomain(1, L), DensityKind::CosineLacunary1D,
                      std::move(axes));
}

DensityModel DensityModel::separable_exp(const TorusDomain& domain,
                                         std::vector<TrigSeries> f_axes) {
  if (static_cast<int>(f_axes.size()) != domain.d)
    throw std::invalid_argument("separable_exp: need one trig polynomial per axis");
  std::vector<AxisDensity> axes;
  axes.reserve(f_axes.size());
  for (auto& f : f_axes) {
    if (f.L != domain.L)
      throw std::invalid_argument("separable_exp: axis period mismatch");
    axes.push_back(AxisDensity::exp_of(f));
  }
  return DensityModel(domain, DensityKind::SeparableExp, std::move(axes));
}

DensityModel DensityModel::tabulated(double L, const Eigen::VectorXd& values) {
  std::vector<AxisDensity> axes{AxisDensity::tabulated(L, values)};
  return DensityModel(TorusDomain(1, L), DensityKind::Tabulated1D, std::move(axes));
}

DensityModel DensityModel::figure1() { return cosine_lacunary(1.0, 2.2, 3.0); }

DensityModel DensityModel::figure2() {
  TrigSeries f1;  // cos(4 pi x)
  f1.L = 1.0;
  f1.a0 = 0.0;
  f1.acos = Eigen::Vector2d(0.0, 1.0);
  f1.bsin = Eigen::Vector2d(0.0, 0.0);
  TrigSeries f2;  // 0.4 cos(2 pi x) + 0.12 sin(4 pi x)
  f2.L = 1.0;
  f2.a0 = 0.0;
  f2.acos = Eigen::Vector2d(0.4, 0.0);
  f2.bsin = Eigen::Vector2d(0.0, 0.12);
  return separable_exp(TorusDomain(3, 1.0), {f1, f2, f2});
}

double DensityModel::eval(const Eigen::VectorXd& x) const {
  if (x.size() != domain_.d)
    throw std::invalid_argument("DensityModel::eval: dimension mismatch");
  double v = 1.0;
  for (int i = 0; i < domain_.d; ++i) v *= axes_[i].eval(x[i]);
  return v;
}

Eigen::VectorXd DensityModel::log_gradient(const Eigen::VectorXd& x) const {
  if (x.size() != domain_.d)
    throw std::invalid_argument("DensityModel::log_gradient: dimension mismatch");
  Eigen::VectorXd g(domain_.d);
  for (int i = 0; i < domain_.d; ++i) g[i] = axes_[i].dlog(x[i]);
  return g;
}

Sample DensityModel::sample(int M, std::uint64_t seed) const {
  if (M < 1) throw std::invalid_argument("sample: M must be >= 1");
  SplitMix64 g = SplitMix64::substream(seed, 0);
  Eigen::MatrixXd pts(M, domain_.d);
  for (int m = 0; m < M; ++m)
    for (int i = 0; i < domain_.d; ++i)
      pts(m, i) = axes_[i].quantile(g.uniform());
  return Sample{domain_, std::move(pts), seed};
}

double DensityModel::normalization_constant(int quad_points) const {
  if (quad_points < 64)
    throw std::invalid_argument("normalization_constant: need >= 64 points per axis");
  double Z = 1.0;
  for (const auto& ax : axes_) {
    double s = 0.0;
    for (int i = 0; i < quad_points; ++i)
      s += ax.eval_unnormalized(ax.length() * i / quad_points);
    Z *= s / quad_points * ax.length();
  }
  return Z;
}

std::string DensityModel::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case DensityKind::Uniform:
      os << "uniform(d=" << domain_.d << ",L=" << domain_.L << ")";
      break;
    case DensityKind::CosineLacunary1D:
      os << "cosine_lacunary(L=" << domain_.L << ")";
      break;
    case DensityKind::SeparableExp:
      os << "separable_exp(d=" << domain_.d << ",L=" << domain_.L << ")";
      break;
    case DensityKind::Tabulated1D:
      os << "tabulated(L=" << domain_.L << ")";
      break;
  }
  return os.str();
}

}  // namespace torusdm
