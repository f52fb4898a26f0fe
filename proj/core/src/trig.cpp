#include "torusdm/trig.hpp"

#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace torusdm {

double TrigSeries::eval(double x) const {
  const double w = 2.0 * M_PI / L;
  double s = a0;
  for (int k = 1; k <= modes(); ++k) {
    const double t = w * k * x;
    s += acos[k - 1] * std::cos(t) + bsin[k - 1] * std::sin(t);
  }
  return s;
}

Eigen::VectorXd TrigSeries::eval(const Eigen::VectorXd& xs) const {
  Eigen::VectorXd out(xs.size());
  for (Eigen::Index i = 0; i < xs.size(); ++i) out[i] = eval(xs[i]);
  return out;
}

double TrigSeries::deriv(double x) const {
  const double w = 2.0 * M_PI / L;
  double s = 0.0;
  for (int k = 1; k <= modes(); ++k) {
    const double t = w * k * x;
    s += w * k * (-acos[k - 1] * std::sin(t) + bsin[k - 1] * std::cos(t));
  }
  return s;
}

TrigSeries TrigSeries::derivative() const {
  const double w = 2.0 * M_PI / L;
  TrigSeries out;
  out.L = L;
  out.a0 = 0.0;
  out.acos.resize(modes());
  out.bsin.resize(modes());
  for (int k = 1; k <= modes(); ++k) {
    out.acos[k - 1] = w * k * bsin[k - 1];
    out.bsin[k - 1] = -w * k * acos[k - 1];
  }
  return out;
}

double TrigSeries::integral0(double x) const {
  const double w = 2.0 * M_PI / L;
  double s = a0 * x;
  for (int k = 1; k <= modes(); ++k) {
    const double wk = w * k, t = wk * x;
    s += acos[k - 1] * std::sin(t) / wk + bsin[k - 1] * (1.0 - std::cos(t)) / wk;
  }
  return s;
}

TrigSeries TrigSeries::truncated(double rel_tol) const {
  double peak = std::abs(a0);
  for (int k = 0; k < modes(); ++k)
    peak = std::max({peak, std::abs(acos[k]), std::abs(bsin[k])});
  int m = 0;
  for (int k = 0; k < modes(); ++k)
    if (std::abs(acos[k]) > rel_tol * peak || std::abs(bsin[k]) > rel_tol * peak)
      m = k + 1;
  TrigSeries out;
  out.L = L;
  out.a0 = a0;
  out.acos = acos.head(m);
  out.bsin = bsin.head(m);
  return out;
}

Eigen::VectorXd TrigSeries::tabulate(int n_grid) const {
  Eigen::VectorXd xs(n_grid);
  for (int i = 0; i < n_grid; ++i) xs[i] = L * i / n_grid;
  return eval(xs);
}

double TrigSeries::dot(const TrigSeries& f, const TrigSeries& g) {
  double s = f.a0 * g.a0;
  const int m = std::min(f.modes(), g.modes());
  for (int k = 0; k < m; ++k)
    s += 0.5 * (f.acos[k] * g.acos[k] + f.bsin[k] * g.bsin[k]);
  return s;
}

Eigen::VectorXcd dft_forward(const Eigen::VectorXcd& values) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in(values.data(), values.data() + values.size());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  Eigen::VectorXcd c = Eigen::Map<Eigen::VectorXcd>(out.data(), values.size());
  c /= double(values.size());
  return c;
}

Eigen::VectorXcd dft_forward(const Eigen::VectorXd& values) {
  return dft_forward(Eigen::VectorXcd(values.cast<std::complex<double>>()));
}

Eigen::VectorXcd dft_inverse(const Eigen::VectorXcd& coeffs) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in(coeffs.data(), coeffs.data() + coeffs.size());
  std::vector<std::complex<double>> out;
  fft.inv(out, in);  // Eigen's inv applies 1/n; undo, our coeffs carry the 1/n
  Eigen::VectorXcd v = Eigen::Map<Eigen::VectorXcd>(out.data(), coeffs.size());
  v *= double(coeffs.size());
  return v;
}

TrigSeries trig_from_grid(const Eigen::VectorXd& values, double L) {
  const int n = static_cast<int>(values.size());
  if (n < 2) throw std::invalid_argument("trig_from_grid: need at least 2 samples");
  const Eigen::VectorXcd c = dft_forward(values);
  const int m = n / 2;
  TrigSeries out;
  out.L = L;
  out.a0 = c[0].real();
  out.acos.setZero(m);
  out.bsin.setZero(m);
  for (int k = 1; k < (n + 1) / 2; ++k) {
    out.acos[k - 1] = 2.0 * c[k].real();
    out.bsin[k - 1] = -2.0 * c[k].imag();
  }
  if (n % 2 == 0) {
    out.acos[m - 1] = c[m].real();  // Nyquist cosine is sampled once
    out.bsin[m - 1] = 0.0;
  }
  return out;
}

TrigSeries trig_from_complex(const Eigen::VectorXcd& coeffs, double L) {
  const int n = static_cast<int>(coeffs.size());
  if (n % 2 != 1) throw std::invalid_argument("trig_from_complex: need odd length");
  const int m = n / 2;
  TrigSeries out;
  out.L = L;
  out.a0 = coeffs[m].real();
  out.acos.resize(m);
  out.bsin.resize(m);
  for (int k = 1; k <= m; ++k) {
    out.acos[k - 1] = 2.0 * coeffs[m + k].real();
    out.bsin[k - 1] = -2.0 * coeffs[m + k].imag();
  }
  return out;
}

}  // namespace torusdm
