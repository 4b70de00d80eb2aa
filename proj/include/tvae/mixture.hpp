#pragma once

// Student-t mixture model in latent space.
//
// Trainable (unconstrained) variables and their constrained forms:
//   pi     = softmax(m)
//   nu_k   = ln(exp(n_k) + exp(2 + eps))            (nu_k > 2)
//   Sigma_k = C_k C_k^T + sigma^2 I,  C_k lower-triangular with exp'd diagonal
//
// The posterior over (z, u) given the encoder output q(x|o) is available in
// closed form: q(u_nk | z_nk = 1) = Gamma(alpha_k, beta_nk) with
//   alpha_k  = (nu_k + D) / 2
//   beta_nk  = (nu_k + Tr{Sigma_n Sigma_k^-1} + Mahalanobis(mu_n, mu_k)) / 2
// and unnormalized class scores
//   ln qz_nk = ln pi_k + (nu_k/2) ln(nu_k/2) - lnGamma(nu_k/2) - 1/2 ln det Sigma_k
//              + lnGamma(alpha_k) - alpha_k ln beta_nk.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tvae/network.hpp"
#include "tvae/params.hpp"
#include "tvae/rng.hpp"
#include "tvae/tensor.hpp"

namespace tvae {

/// Offset in the dof floor: nu_k > 2 + kDofEpsilon.
inline constexpr double kDofEpsilon = 1e-3;
inline constexpr double kDofFloor = 2.0 + kDofEpsilon;
/// Lower clamp applied to beta before taking logs.
inline constexpr double kBetaFloor = 1e-30;
/// Dof used for the Gaussian-limit baseline.
inline constexpr double kGaussianDof = 1e6;

// Variable names of the mixture parameters inside a ParamSet.
inline const std::string kMixLogits = "mix.m";
inline const std::string kMixDof = "mix.n";
inline const std::string kMixMean = "mix.mu";
inline const std::string kMixCLower = "mix.C_lower";
inline const std::string kMixCLogDiag = "mix.C_logdiag";

struct SmmRawParams {
  std::size_t components = 0;
  std::size_t dim = 0;
  std::vector<double> m;          // K mixing logits
  std::vector<double> n;          // K dof pre-activations
  std::vector<double> mu;         // K x D means
  std::vector<double> c_lower;    // K x D(D-1)/2 strictly lower entries, row by row
  std::vector<double> c_logdiag;  // K x D log of C_k's diagonal
  double sigma_jitter_sq = 0.1;

  void validate() const;
  void store(ParamSet& params) const;
  static SmmRawParams load(const ParamSet& params, double sigma_jitter_sq);
};

/// Materialized (constrained) parameters as plain numbers.
struct SmmParams {
  std::size_t components = 0;
  std::size_t dim = 0;
  std::vector<double> pi;
  std::vector<double> nu;
  std::vector<double> mu;          // K x D
  std::vector<double> sigma_chol;  // K blocks of D x D lower factors
  std::vector<double> log_det_sigma;

  std::vector<double> sigma(std::size_t k) const;
};

/// Materialized parameters as graph tensors, differentiable back to the raw
/// variables.
struct SmmGraph {
  std::size_t components = 0;
  std::size_t dim = 0;
  Tensor log_pi;                 // 1 x K
  Tensor nu;                     // 1 x K
  Tensor mu;                     // K x D
  std::vector<Tensor> chol;      // K of D x D
  std::vector<Tensor> chol_inv;  // K of D x D, by triangular solve
  Tensor log_det;                // 1 x K
};

/// nu = ln(exp(n) + exp(2 + eps)), stable for any n.
double dof_from_preactivation(double n);
/// Inverse of dof_from_preactivation; nu must exceed the floor.
double preactivation_from_dof(double nu);

SmmGraph materialize(const LeafMap& leaves, std::size_t components, std::size_t dim,
                     double sigma_jitter_sq);
SmmParams materialize_params(const SmmRawParams& raw);
SmmParams to_params(const SmmGraph& g);

struct PosteriorStats {
  Tensor alpha;    // 1 x K
  Tensor beta;     // N x K
  Tensor log_qz;   // N x K, unnormalized per row
  Tensor gamma;    // N x K responsibilities
  Tensor log_rho;  // N x K
};

Tensor compute_alpha(const SmmGraph& params, std::size_t dim);
Tensor compute_beta(const EncoderStats& enc, const SmmGraph& params);
Tensor compute_log_qz(const SmmGraph& params, const Tensor& alpha, const Tensor& beta);
Tensor responsibilities(const Tensor& log_qz);
Tensor compute_log_rho(const Tensor& log_qz, const Tensor& alpha, const Tensor& beta,
                       std::size_t dim);
/// All posterior statistics; with detach_gamma the responsibilities carry no gradient.
PosteriorStats posterior(const EncoderStats& enc, const SmmGraph& params, bool detach_gamma = false);

/// Number of beta entries clamped to kBetaFloor since process start.
std::size_t beta_floor_hits();

/// Row-wise argmax; ties go to the lowest index.
std::vector<int> argmax_rows(const Tensor& scores);

struct GenerativeSample {
  std::vector<int> labels;
  std::vector<double> scales;   // u_n of the chosen component
  std::vector<double> latents;  // count x D
};

/// z ~ Cat(pi), u ~ Gamma(nu_z/2, nu_z/2), x ~ N(mu_z, Sigma_z / u).
GenerativeSample sample_generative(Rng& rng, const SmmParams& params, std::size_t count);

struct GmmOptions {
  std::size_t max_iters = 50;
  /// Stop when the mean per-point objective gain drops below this.
  double tol = 1e-6;
  /// Ridge c in Sigma_k = S_k + (c / N_k) I, the exact MAP step for a
  /// -c/2 tr(Sigma_k^-1) penalty, so the reported objective never decreases.
  double reg_covar = 1e-6;
  /// Dof assigned to every component of the returned raw parameters.
  double initial_dof = 5.0;
};

struct GmmFit {
  SmmRawParams raw;
  std::vector<double> weights;      // K
  std::vector<double> means;        // K x D
  std::vector<double> covariances;  // K x D x D
  std::vector<double> resp;         // N x K from the final E-step
  std::vector<double> objective;    // penalized log-likelihood per iteration
  std::size_t reseeds = 0;
};

/// EM for a full-covariance Gaussian mixture with k-means++ seeding. Returns
/// raw SMM parameters whose C_k factor Sigma_k - sigma^2 I (eigenvalues floored).
GmmFit gmm_em_fit(std::span<const double> data, std::size_t rows, std::size_t dim,
                  std::size_t components, Rng& rng, double sigma_jitter_sq,
                  const GmmOptions& opts = {});

/// One M-step from hard labels; component k is fit to rows labelled k.
GmmFit gmm_fit_from_labels(std::span<const double> data, std::size_t rows, std::size_t dim,
                           std::size_t components, std::span<const int> labels,
                           double sigma_jitter_sq, const GmmOptions& opts = {});

/// Raw SMM parameters reproducing the given weights, means and covariances.
SmmRawParams raw_from_moments(std::span<const double> weights, std::span<const double> means,
                              std::span<const double> covariances, std::size_t components,
                              std::size_t dim, double sigma_jitter_sq, double dof);

/// Symmetric eigen-decomposition (cyclic Jacobi): eigenvalues and row-major
/// eigenvectors in columns.
void symmetric_eigen(std::span<const double> a, std::size_t n, std::vector<double>& values,
                     std::vector<double>& vectors);

}  // namespace tvae
