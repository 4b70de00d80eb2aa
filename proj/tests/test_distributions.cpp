#include <doctest.h>

#include <cmath>
#include <vector>

#include "tvae/distributions.hpp"
#include "tvae/errors.hpp"
#include "tvae/special.hpp"

using namespace tvae;

namespace {

// Independent oracle: the Student-t density as a scale mixture
//   p(x) = int N(x; mu, Sigma / u) Gamma(u; nu/2, nu/2) du,
// integrated by the trapezoid rule in t = ln u.
double student_t_by_quadrature(const std::vector<double>& x, const std::vector<double>& mu,
                               const std::vector<double>& sigma, double nu) {
  const std::size_t d = x.size();
  // Mahalanobis distance and log-determinant via a local Cholesky.
  std::vector<double> l(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = sigma[i * d + j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i * d + k] * l[j * d + k];
      l[i * d + j] = i == j ? std::sqrt(s) : s / l[j * d + j];
    }
  }
  std::vector<double> y(d);
  double maha = 0.0, logdet = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double s = x[i] - mu[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * d + k] * y[k];
    y[i] = s / l[i * d + i];
    maha += y[i] * y[i];
    logdet += 2.0 * std::log(l[i * d + i]);
  }
  const double a = 0.5 * nu;
  auto integrand = [&](double t) {
    const double u = std::exp(t);
    const double log_gauss = 0.5 * d * (t - std::log(2.0 * special::kPi)) - 0.5 * logdet - 0.5 * u * maha;
    const double log_gamma = a * std::log(a) - std::lgamma(a) + (a - 1.0) * t - a * u;
    return std::exp(log_gauss + log_gamma + t);
  };
  const double lo = -60.0, hi = 12.0;
  const int steps = 40000;
  const double h = (hi - lo) / steps;
  double acc = 0.5 * (integrand(lo) + integrand(hi));
  for (int i = 1; i < steps; ++i) acc += integrand(lo + i * h);
  return std::log(acc * h);
}

std::vector<double> random_spd(Rng& rng, std::size_t d) {
  std::vector<double> a(d * d), s(d * d, 0.0);
  for (auto& v : a) v = rng.normal();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < d; ++k) s[i * d + j] += a[i * d + k] * a[j * d + k];
      if (i == j) s[i * d + j] += 0.5;
    }
  return s;
}

}  // namespace

TEST_CASE("diagonal Gaussian log-density") {
  const double x0[] = {0.0};
  CHECK(gaussian_diag_log_pdf(x0, {{0.0}, {0.0}}) == doctest::Approx(-0.9189385332046727).epsilon(1e-15));
  const DiagGaussian g{{1.0, -2.0, 0.5}, {0.3, -0.1, 0.7}};
  CHECK(gaussian_diag_log_pdf(g.mean, g) ==
        doctest::Approx(-(0.3 - 0.1 + 0.7) - 1.5 * special::kLn2Pi).epsilon(1e-14));

  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    DiagGaussian r{{rng.normal(), rng.normal()}, {0.5 * rng.normal(), 0.5 * rng.normal()}};
    const std::vector<double> x = {rng.normal(), rng.normal()};
    double want = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      const double s = std::exp(r.log_std[i]);
      want += std::log(std::exp(-0.5 * std::pow((x[i] - r.mean[i]) / s, 2)) / (s * std::sqrt(2 * special::kPi)));
    }
    CHECK(gaussian_diag_log_pdf(x, r) == doctest::Approx(want).epsilon(1e-12));
  }
  const double x2[] = {0.0, 0.0};
  CHECK_THROWS_AS(gaussian_diag_log_pdf(x2, {{0.0}, {0.0}}), ContractError);
}

TEST_CASE("diagonal Gaussian entropy") {
  CHECK(gaussian_diag_entropy({{0.0}, {0.0}}) == doctest::Approx(1.4189385332046727).epsilon(1e-15));
  CHECK(gaussian_diag_entropy({{0.0, 0.0}, {0.0, 0.0}}) == doctest::Approx(2.8378770664093453).epsilon(1e-15));
  CHECK(gaussian_diag_entropy({{0.0}, {std::log(2.0)}}) ==
        doctest::Approx(1.4189385332046727 + 0.6931471805599453).epsilon(1e-15));
}

TEST_CASE("Gamma entropy") {
  CHECK(gamma_entropy({1.0, 1.0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(gamma_entropy({1.0, std::exp(1.0)})) < 1e-12);
  CHECK(gamma_entropy({2.0, 1.0}) == doctest::Approx(1.0 + special::kEulerGamma).epsilon(1e-12));
  CHECK_THROWS_AS(gamma_entropy({0.0, 1.0}), DomainError);
  CHECK_THROWS_AS(gamma_entropy({1.0, -1.0}), DomainError);
}

TEST_CASE("Gamma entropy matches Monte Carlo") {
  Rng rng(21);
  for (const GammaDist d : {GammaDist{2.5, 2.5}, GammaDist{6.0, 0.7}, GammaDist{1.3, 4.0}}) {
    double acc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) acc -= gamma_log_pdf(sample_gamma(rng, d), d);
    CHECK(std::fabs(acc / n - gamma_entropy(d)) < 1e-2);
  }
}

TEST_CASE("Student-t known values") {
  const StudentT cauchy{{0.0}, {1.0}, 1.0};
  const double x0[] = {0.0}, x1[] = {1.0};
  CHECK(student_t_log_pdf(x0, cauchy) == doctest::Approx(-std::log(special::kPi)).epsilon(1e-13));
  CHECK(student_t_log_pdf(x1, cauchy) == doctest::Approx(-std::log(2.0 * special::kPi)).epsilon(1e-13));
  const double x2[] = {0.0, 0.0};
  CHECK_THROWS_AS(student_t_log_pdf(x2, cauchy), ContractError);
  CHECK_THROWS_AS(student_t_log_pdf(x0, StudentT{{0.0}, {-1.0}, 3.0}), DomainError);
  CHECK_THROWS_AS(student_t_log_pdf(x2, StudentT{{0.0, 0.0}, {1.0, 0.5, 0.4, 1.0}, 3.0}), ContractError);
}

TEST_CASE("Student-t matches the Gaussian-Gamma scale mixture by quadrature") {
  Rng rng(13);
  for (std::size_t d = 1; d <= 3; ++d) {
    for (int trial = 0; trial < 10; ++trial) {
      StudentT s;
      for (std::size_t i = 0; i < d; ++i) s.mean.push_back(rng.normal());
      s.scale = random_spd(rng, d);
      s.dof_nu = 0.5 + 20.0 * rng.uniform();
      std::vector<double> x;
      for (std::size_t i = 0; i < d; ++i) x.push_back(s.mean[i] + 2.0 * rng.normal());
      const double want = student_t_by_quadrature(x, s.mean, s.scale, s.dof_nu);
      CHECK(std::fabs(student_t_log_pdf(x, s) - want) < 1e-6);
    }
  }
}

TEST_CASE("one-dimensional Student-t integrates to one") {
  for (double nu : {2.5, 5.0, 50.0}) {
    const StudentT s{{0.3}, {0.8}, nu};
    const int steps = 200000;
    const double lo = -50.0, hi = 50.0, h = (hi - lo) / steps;
    double acc = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double x[] = {lo + i * h};
      const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
      acc += w * std::exp(student_t_log_pdf(x, s));
    }
    CHECK(std::fabs(acc * h - 1.0) < 1e-4);
  }
}

TEST_CASE("Student-t approaches the Gaussian as the dof grows") {
  Rng rng(17);
  const std::size_t d = 3;
  StudentT s;
  s.mean = {0.1, -0.4, 1.0};
  s.scale = random_spd(rng, d);
  s.dof_nu = 1e6;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x;
    for (std::size_t j = 0; j < d; ++j) x.push_back(s.mean[j] + rng.normal());
    CHECK(std::fabs(student_t_log_pdf(x, s) - gaussian_log_pdf(x, s.mean, s.scale)) < 1e-3);
  }
}

TEST_CASE("standard normal sampler") {
  Rng a(5), b(5);
  const Tensor t1 = sample_standard_normal(a, {2, 3});
  const Tensor t2 = sample_standard_normal(b, {2, 3});
  CHECK(t1.numel() == 6);
  CHECK(t1.to_vector() == t2.to_vector());

  Rng rng(6);
  const auto big = sample_standard_normal(rng, {1000000}).to_vector();
  double m = 0.0, v = 0.0;
  for (double x : big) m += x;
  m /= static_cast<double>(big.size());
  for (double x : big) v += (x - m) * (x - m);
  v /= static_cast<double>(big.size());
  CHECK(std::fabs(m) < 0.01);
  CHECK(std::fabs(v - 1.0) < 0.01);
}

TEST_CASE("Gamma sampler moments") {
  Rng rng(7);
  const GammaDist d{2.5, 2.5};
  const int n = 1000000;
  std::vector<double> u(n);
  for (auto& x : u) x = sample_gamma(rng, d);
  double m = 0.0, v = 0.0;
  for (double x : u) m += x;
  m /= n;
  for (double x : u) v += (x - m) * (x - m);
  v /= n;
  CHECK(std::fabs(m - 1.0) < 0.01);
  CHECK(std::fabs(v - 0.4) / 0.4 < 0.02);

  // Shape below one uses the boost.
  const GammaDist small{0.4, 2.0};
  double ms = 0.0;
  for (int i = 0; i < 200000; ++i) ms += sample_gamma(rng, small);
  CHECK(std::fabs(ms / 200000 - 0.2) < 0.005);

  Rng r1(3), r2(3);
  for (int i = 0; i < 10; ++i) CHECK(sample_gamma(r1, d) == sample_gamma(r2, d));
  CHECK_THROWS_AS(sample_gamma(rng, {0.0, 1.0}), DomainError);
}

TEST_CASE("categorical sampler") {
  Rng rng(8);
  const double point[] = {1.0, 0.0, 0.0};
  for (int i = 0; i < 1000; ++i) CHECK(sample_categorical(rng, point) == 0);
  const double half[] = {0.5, 0.5};
  int zeros = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) zeros += sample_categorical(rng, half) == 0;
  CHECK(std::fabs(static_cast<double>(zeros) / n - 0.5) < 0.002);

  Rng r1(4), r2(4);
  const double w[] = {0.2, 0.3, 0.5};
  for (int i = 0; i < 20; ++i) CHECK(sample_categorical(r1, w) == sample_categorical(r2, w));
  const double bad[] = {0.5, 0.6};
  CHECK_THROWS_AS(sample_categorical(rng, bad), ContractError);
  const double neg[] = {1.5, -0.5};
  CHECK_THROWS_AS(sample_categorical(rng, neg), ContractError);
}

TEST_CASE("Cholesky factor") {
  const double a[] = {4.0, 2.0, 2.0, 3.0};
  const auto l = cholesky_factor(a, 2);
  CHECK(l[0] == doctest::Approx(2.0));
  CHECK(l[2] == doctest::Approx(1.0));
  CHECK(l[3] == doctest::Approx(std::sqrt(2.0)));
  const double bad[] = {1.0, 2.0, 2.0, 1.0};
  CHECK_THROWS_AS(cholesky_factor(bad, 2), DomainError);
}
