#pragma once

// Densities, entropies and samplers for the diagonal Gaussian, Gamma,
// categorical and multivariate Student-t distributions.

#include <cstddef>
#include <span>
#include <vector>

#include "tvae/rng.hpp"
#include "tvae/tensor.hpp"

namespace tvae {

struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> log_std;
};

/// Gamma(shape alpha, rate beta).
struct GammaDist {
  double shape_alpha = 1.0;
  double rate_beta = 1.0;
};

/// Multivariate Student-t with row-major D x D scale matrix.
struct StudentT {
  std::vector<double> mean;
  std::vector<double> scale;
  double dof_nu = 1.0;
};

double gaussian_diag_log_pdf(std::span<const double> x, const DiagGaussian& g);
double gaussian_diag_entropy(const DiagGaussian& g);
double gamma_entropy(const GammaDist& d);
double gamma_log_pdf(double u, const GammaDist& d);
double student_t_log_pdf(std::span<const double> x, const StudentT& s);
/// Full-covariance Gaussian log-density (row-major covariance).
double gaussian_log_pdf(std::span<const double> x, std::span<const double> mean,
                        std::span<const double> cov);

Tensor sample_standard_normal(Rng& rng, const Shape& shape);
/// Marsaglia-Tsang; shapes below one use the u^(1/alpha) boost.
double sample_gamma(Rng& rng, const GammaDist& d);
std::size_t sample_categorical(Rng& rng, std::span<const double> weights);

/// Lower Cholesky factor of a row-major SPD matrix; DomainError otherwise.
std::vector<double> cholesky_factor(std::span<const double> a, std::size_t n);

}  // namespace tvae
