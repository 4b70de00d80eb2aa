#include "tvae/distributions.hpp"

#include <cmath>
#include <string>

#include "tvae/errors.hpp"
#include "tvae/special.hpp"

namespace tvae {
namespace {

void check_gamma(const GammaDist& d, const char* op) {
  if (!(d.shape_alpha > 0.0) || !(d.rate_beta > 0.0) || !std::isfinite(d.shape_alpha) ||
      !std::isfinite(d.rate_beta)) {
    throw DomainError(std::string(op) + ": Gamma parameters must be positive");
  }
}

// Squared Mahalanobis distance (x - mu)^T (L L^T)^{-1} (x - mu).
double mahalanobis_sq(std::span<const double> x, std::span<const double> mean,
                      const std::vector<double>& l, std::size_t n) {
  std::vector<double> y(n);
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i] - mean[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * y[k];
    y[i] = s / l[i * n + i];
    q += y[i] * y[i];
  }
  return q;
}

double log_det_from_chol(const std::vector<double>& l, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::log(l[i * n + i]);
  return 2.0 * s;
}

}  // namespace

std::vector<double> cholesky_factor(std::span<const double> a, std::size_t n) {
  if (a.size() != n * n) throw ContractError("cholesky_factor: expected n*n entries");
  std::vector<double> l(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double s = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) s -= l[j * n + k] * l[j * n + k];
    if (!(s > 0.0)) throw DomainError("cholesky_factor: matrix is not positive definite");
    l[j * n + j] = std::sqrt(s);
    for (std::size_t i = j + 1; i < n; ++i) {
      double t = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) t -= l[i * n + k] * l[j * n + k];
      l[i * n + j] = t / l[j * n + j];
    }
  }
  return l;
}

double gaussian_diag_log_pdf(std::span<const double> x, const DiagGaussian& g) {
  if (x.size() != g.mean.size() || g.mean.size() != g.log_std.size()) {
    throw ContractError("gaussian_diag_log_pdf: dimension mismatch");
  }
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - g.mean[i]) * std::exp(-g.log_std[i]);
    lp += -0.5 * special::kLn2Pi - g.log_std[i] - 0.5 * z * z;
  }
  return lp;
}

double gaussian_diag_entropy(const DiagGaussian& g) {
  if (g.mean.size() != g.log_std.size()) throw ContractError("gaussian_diag_entropy: dimension mismatch");
  double h = 0.5 * static_cast<double>(g.log_std.size()) * (special::kLn2Pi + 1.0);
  for (double s : g.log_std) h += s;
  return h;
}

double gamma_entropy(const GammaDist& d) {
  check_gamma(d, "gamma_entropy");
  const double a = d.shape_alpha;
  return a - std::log(d.rate_beta) + special::lgamma(a) + (1.0 - a) * special::digamma(a);
}

double gamma_log_pdf(double u, const GammaDist& d) {
  check_gamma(d, "gamma_log_pdf");
  if (!(u > 0.0)) throw DomainError("gamma_log_pdf: u must be > 0");
  const double a = d.shape_alpha;
  return a * std::log(d.rate_beta) - special::lgamma(a) + (a - 1.0) * std::log(u) - d.rate_beta * u;
}

double student_t_log_pdf(std::span<const double> x, const StudentT& s) {
  const std::size_t n = s.mean.size();
  if (x.size() != n || s.scale.size() != n * n) throw ContractError("student_t_log_pdf: dimension mismatch");
  if (!(s.dof_nu > 0.0)) throw DomainError("student_t_log_pdf: dof must be > 0");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::fabs(s.scale[i * n + j] - s.scale[j * n + i]) > 1e-12) {
        throw ContractError("student_t_log_pdf: scale matrix is not symmetric");
      }
  const auto l = cholesky_factor(s.scale, n);
  const double nu = s.dof_nu;
  const double d = static_cast<double>(n);
  const double q = mahalanobis_sq(x, s.mean, l, n);
  return special::lgamma(0.5 * (nu + d)) - special::lgamma(0.5 * nu) - 0.5 * log_det_from_chol(l, n) -
         0.5 * d * std::log(special::kPi * nu) - 0.5 * (nu + d) * std::log1p(q / nu);
}

double gaussian_log_pdf(std::span<const double> x, std::span<const double> mean,
                        std::span<const double> cov) {
  const std::size_t n = mean.size();
  if (x.size() != n || cov.size() != n * n) throw ContractError("gaussian_log_pdf: dimension mismatch");
  const auto l = cholesky_factor(cov, n);
  const double q = mahalanobis_sq(x, mean, l, n);
  return -0.5 * static_cast<double>(n) * special::kLn2Pi - 0.5 * log_det_from_chol(l, n) - 0.5 * q;
}

Tensor sample_standard_normal(Rng& rng, const Shape& shape) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor::constant(shape, std::move(v));
}

double sample_gamma(Rng& rng, const GammaDist& d) {
  check_gamma(d, "sample_gamma");
  double a = d.shape_alpha;
  double boost = 1.0;
  if (a < 1.0) {
    boost = std::pow(rng.uniform_pos(), 1.0 / a);
    a += 1.0;
  }
  const double dd = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * dd);
  for (;;) {
    double x;
    double v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return boost * dd * v / d.rate_beta;
    if (std::log(u) < 0.5 * x * x + dd * (1.0 - v + std::log(v))) return boost * dd * v / d.rate_beta;
  }
}

std::size_t sample_categorical(Rng& rng, std::span<const double> weights) {
  if (weights.empty()) throw ContractError("sample_categorical: empty weights");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("sample_categorical: negative weight");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw ContractError("sample_categorical: weights do not sum to 1");
  const double u = rng.uniform() * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    last = k;
    acc += weights[k];
    if (u < acc) return k;
  }
  return last;
}

}  // namespace tvae
