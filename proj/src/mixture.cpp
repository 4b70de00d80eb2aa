#include "tvae/mixture.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <set>
#include <numeric>

#include "tvae/distributions.hpp"
#include "tvae/errors.hpp"
#include "tvae/special.hpp"

namespace tvae {
namespace {

std::atomic<std::size_t> g_beta_hits{0};

std::size_t packed_size(std::size_t d) { return d * (d - 1) / 2; }

void require_size(const std::vector<double>& v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw ContractError(std::string("SmmRawParams: ") + what + " has " + std::to_string(v.size()) +
                        " entries, expected " + std::to_string(n));
  }
}

}  // namespace

void SmmRawParams::validate() const {
  if (components == 0 || dim == 0) throw ContractError("SmmRawParams: K and D must be positive");
  require_size(m, components, "m");
  require_size(n, components, "n");
  require_size(mu, components * dim, "mu");
  require_size(c_lower, components * packed_size(dim), "C_lower");
  require_size(c_logdiag, components * dim, "C_logdiag");
  if (!(sigma_jitter_sq > 0.0)) throw ContractError("SmmRawParams: sigma_jitter_sq must be > 0");
}

void SmmRawParams::store(ParamSet& params) const {
  validate();
  params[kMixLogits] = {{1, components}, m};
  params[kMixDof] = {{1, components}, n};
  params[kMixMean] = {{components, dim}, mu};
  params[kMixCLower] = {{components, packed_size(dim)}, c_lower};
  params[kMixCLogDiag] = {{components, dim}, c_logdiag};
}

SmmRawParams SmmRawParams::load(const ParamSet& params, double sigma_jitter_sq) {
  auto get = [&](const std::string& name) -> const ParamBlock& {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("missing mixture parameter '" + name + "'");
    return it->second;
  };
  SmmRawParams raw;
  const auto& mu = get(kMixMean);
  raw.components = mu.shape.at(0);
  raw.dim = mu.shape.at(1);
  raw.m = get(kMixLogits).values;
  raw.n = get(kMixDof).values;
  raw.mu = mu.values;
  raw.c_lower = get(kMixCLower).values;
  raw.c_logdiag = get(kMixCLogDiag).values;
  raw.sigma_jitter_sq = sigma_jitter_sq;
  raw.validate();
  return raw;
}

std::vector<double> SmmParams::sigma(std::size_t k) const {
  const std::size_t d = dim;
  const double* l = sigma_chol.data() + k * d * d;
  std::vector<double> s(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r <= std::min(i, j); ++r) acc += l[i * d + r] * l[j * d + r];
      s[i * d + j] = acc;
    }
  return s;
}

double dof_from_preactivation(double n) {
  const double x = n - kDofFloor;
  const double sp = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return kDofFloor + sp;
}

double preactivation_from_dof(double nu) {
  const double y = nu - kDofFloor;
  if (!(y > 0.0)) throw DomainError("preactivation_from_dof: nu must exceed 2 + eps");
  // n = c + ln(expm1(y))
  return kDofFloor + (y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y)));
}

SmmGraph materialize(const LeafMap& leaves, std::size_t components, std::size_t dim,
                     double sigma_jitter_sq) {
  if (!(sigma_jitter_sq > 0.0)) throw ContractError("materialize: sigma_jitter_sq must be > 0");
  SmmGraph g;
  g.components = components;
  g.dim = dim;
  const Tensor& m = leaf(leaves, kMixLogits);
  const Tensor& n = leaf(leaves, kMixDof);
  const Tensor& c_lower = leaf(leaves, kMixCLower);
  const Tensor& c_logdiag = leaf(leaves, kMixCLogDiag);
  g.mu = leaf(leaves, kMixMean);
  if (m.numel() != components || n.numel() != components || g.mu.rows() != components ||
      g.mu.cols() != dim) {
    throw ContractError("materialize: parameter shapes do not match K=" + std::to_string(components) +
                        ", D=" + std::to_string(dim));
  }
  const Tensor logits = reshape(m, {1, components});
  g.log_pi = sub(logits, logsumexp_rows(logits));
  g.nu = add_scalar(softplus(add_scalar(reshape(n, {1, components}), -kDofFloor)), kDofFloor);

  const Tensor jitter = scale(Tensor::identity(dim), sigma_jitter_sq);
  const Tensor eye = Tensor::identity(dim);
  std::vector<Tensor> log_dets;
  for (std::size_t k = 0; k < components; ++k) {
    const Tensor c = add(unpack_strict_lower(slice_rows(c_lower, k, k + 1), dim),
                         diag_embed(exp(slice_rows(c_logdiag, k, k + 1))));
    const Tensor sigma = add(matmul(c, transpose(c)), jitter);
    const Tensor l = cholesky(sigma);
    g.chol.push_back(l);
    g.chol_inv.push_back(tri_solve_lower(l, eye));
    log_dets.push_back(scale(sum(log(diag_part(l))), 2.0));
  }
  g.log_det = concat_cols(log_dets);
  return g;
}

SmmParams to_params(const SmmGraph& g) {
  SmmParams p;
  p.components = g.components;
  p.dim = g.dim;
  for (double lp : g.log_pi.data()) p.pi.push_back(std::exp(lp));
  p.nu = g.nu.to_vector();
  p.mu = g.mu.to_vector();
  for (const auto& l : g.chol) {
    p.sigma_chol.insert(p.sigma_chol.end(), l.data().begin(), l.data().end());
  }
  p.log_det_sigma = g.log_det.to_vector();
  return p;
}

SmmParams materialize_params(const SmmRawParams& raw) {
  raw.validate();
  ParamSet ps;
  raw.store(ps);
  std::set<std::string> all;
  for (const auto& [name, _] : ps) all.insert(name);
  const LeafMap leaves = make_leaves(ps, all);
  return to_params(materialize(leaves, raw.components, raw.dim, raw.sigma_jitter_sq));
}

Tensor compute_alpha(const SmmGraph& params, std::size_t dim) {
  if (dim == 0) throw ContractError("compute_alpha: D must be >= 1");
  return scale(add_scalar(params.nu, static_cast<double>(dim)), 0.5);
}

Tensor compute_beta(const EncoderStats& enc, const SmmGraph& params) {
  const std::size_t d = params.dim;
  if (enc.mu_x.cols() != d || enc.log_std_x.cols() != d || enc.mu_x.rows() != enc.log_std_x.rows()) {
    throw ContractError("compute_beta: encoder output does not match latent dimension");
  }
  const Tensor var = exp(scale(enc.log_std_x, 2.0));
  std::vector<Tensor> traces;
  std::vector<Tensor> mahas;
  for (std::size_t k = 0; k < params.components; ++k) {
    const Tensor& linv = params.chol_inv[k];
    // diag(Sigma_k^-1)_d = sum_i (L^-1)_{id}^2
    const Tensor prec_diag = sum_cols(square(linv));
    traces.push_back(matmul(var, transpose(prec_diag)));
    const Tensor diff = sub(enc.mu_x, slice_rows(params.mu, k, k + 1));
    mahas.push_back(sum_rows(square(matmul(diff, transpose(linv)))));
  }
  const Tensor beta = scale(add(params.nu, add(concat_cols(traces), concat_cols(mahas))), 0.5);
  std::size_t hits = 0;
  for (double b : beta.data()) hits += b < kBetaFloor;
  if (hits) {
    g_beta_hits += hits;
    std::clog << "tvae: numeric anomaly: " << hits << " beta entries clamped at " << kBetaFloor << '\n';
    return clamp(beta, kBetaFloor, std::numeric_limits<double>::max());
  }
  return beta;
}

std::size_t beta_floor_hits() { return g_beta_hits.load(); }

Tensor compute_log_qz(const SmmGraph& params, const Tensor& alpha, const Tensor& beta) {
  const std::size_t rows = beta.rows();
  const std::size_t kk = params.components;
  for (std::size_t k = 0; k < kk; ++k) {
    if (!(alpha.data()[k] > 1.0)) {
      throw NumericFault("compute_log_qz: alpha_" + std::to_string(k) + " must exceed 1");
    }
  }
  for (std::size_t n = 0; n < rows; ++n)
    for (std::size_t k = 0; k < kk; ++k) {
      const double b = beta.data()[n * kk + k];
      if (!(b > 0.0) || !std::isfinite(b)) {
        throw NumericFault("compute_log_qz: beta is not finite and positive at (n=" + std::to_string(n) +
                           ", k=" + std::to_string(k) + ")");
      }
    }
  const Tensor half_nu = scale(params.nu, 0.5);
  // Per-component constant: ln pi + (nu/2) ln(nu/2) - lnG(nu/2) - 1/2 ln det + lnG(alpha)
  const Tensor row_term = add(sub(add(params.log_pi, mul(half_nu, log(half_nu))), lgamma(half_nu)),
                              sub(lgamma(alpha), scale(params.log_det, 0.5)));
  return sub(row_term, mul(alpha, log(beta)));
}

Tensor responsibilities(const Tensor& log_qz) { return softmax_rows(log_qz); }

Tensor compute_log_rho(const Tensor& log_qz, const Tensor& alpha, const Tensor& beta,
                       std::size_t dim) {
  if (dim == 0) throw ContractError("compute_log_rho: D must be >= 1");
  // H(Gamma(alpha, beta)) = alpha - ln beta + lnG(alpha) + (1 - alpha) psi(alpha)
  const Tensor h_alpha = add(add(alpha, lgamma(alpha)), mul(sub(Tensor::scalar(1.0), alpha), digamma(alpha)));
  const Tensor entropy = sub(h_alpha, log(beta));
  return add_scalar(sub(log_qz, entropy), -0.5 * static_cast<double>(dim) * special::kLn2Pi);
}

PosteriorStats posterior(const EncoderStats& enc, const SmmGraph& params, bool detach_gamma) {
  PosteriorStats s;
  s.alpha = compute_alpha(params, params.dim);
  s.beta = compute_beta(enc, params);
  s.log_qz = compute_log_qz(params, s.alpha, s.beta);
  s.gamma = responsibilities(detach_gamma ? s.log_qz.detach() : s.log_qz);
  s.log_rho = compute_log_rho(s.log_qz, s.alpha, s.beta, params.dim);
  return s;
}

std::vector<int> argmax_rows(const Tensor& scores) {
  const std::size_t rows = scores.rows();
  const std::size_t cols = scores.cols();
  std::vector<int> out(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = scores.data().data() + r * cols;
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (x[c] > x[best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

GenerativeSample sample_generative(Rng& rng, const SmmParams& params, std::size_t count) {
  const std::size_t d = params.dim;
  GenerativeSample out;
  out.labels.reserve(count);
  out.scales.reserve(count);
  out.latents.reserve(count * d);
  std::vector<double> eps(d);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t z = sample_categorical(rng, params.pi);
    const double nu = params.nu[z];
    const double u = sample_gamma(rng, {0.5 * nu, 0.5 * nu});
    for (auto& e : eps) e = rng.normal();
    const double* l = params.sigma_chol.data() + z * d * d;
    const double s = 1.0 / std::sqrt(u);
    for (std::size_t r = 0; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c <= r; ++c) acc += l[r * d + c] * eps[c];
      out.latents.push_back(params.mu[z * d + r] + s * acc);
    }
    out.labels.push_back(static_cast<int>(z));
    out.scales.push_back(u);
  }
  return out;
}

void symmetric_eigen(std::span<const double> a_in, std::size_t n, std::vector<double>& values,
                     std::vector<double>& vectors) {
  std::vector<double> a(a_in.begin(), a_in.end());
  vectors.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) vectors[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::fabs(apq) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vectors[k * n + p];
          const double vkq = vectors[k * n + q];
          vectors[k * n + p] = c * vkp - s * vkq;
          vectors[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  values.resize(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = a[i * n + i];
}

SmmRawParams raw_from_moments(std::span<const double> weights, std::span<const double> means,
                              std::span<const double> covariances, std::size_t components,
                              std::size_t dim, double sigma_jitter_sq, double dof) {
  const std::size_t d = dim;
  SmmRawParams raw;
  raw.components = components;
  raw.dim = d;
  raw.sigma_jitter_sq = sigma_jitter_sq;
  raw.mu.assign(means.begin(), means.end());
  const double n_pre = preactivation_from_dof(dof);
  const double floor = std::max(1e-3 * sigma_jitter_sq, 1e-12);
  for (std::size_t k = 0; k < components; ++k) {
    raw.m.push_back(std::log(std::max(weights[k], 1e-12)));
    raw.n.push_back(n_pre);
    std::vector<double> a(covariances.begin() + static_cast<std::ptrdiff_t>(k * d * d),
                          covariances.begin() + static_cast<std::ptrdiff_t>((k + 1) * d * d));
    for (std::size_t i = 0; i < d; ++i) a[i * d + i] -= sigma_jitter_sq;
    std::vector<double> vals;
    std::vector<double> vecs;
    symmetric_eigen(a, d, vals, vecs);
    std::vector<double> rebuilt(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double acc = 0.0;
        for (std::size_t e = 0; e < d; ++e) acc += vecs[i * d + e] * std::max(vals[e], floor) * vecs[j * d + e];
        rebuilt[i * d + j] = acc;
        rebuilt[j * d + i] = acc;
      }
    const auto l = cholesky_factor(rebuilt, d);
    for (std::size_t i = 0; i < d; ++i) {
      raw.c_logdiag.push_back(std::log(l[i * d + i]));
      for (std::size_t j = 0; j < i; ++j) raw.c_lower.push_back(l[i * d + j]);
    }
  }
  return raw;
}

namespace {

struct GmmState {
  std::size_t k = 0;
  std::size_t d = 0;
  std::vector<double> w;
  std::vector<double> mu;
  std::vector<double> cov;
};

// E-step; returns the penalized objective and fills resp.
double gmm_estep(std::span<const double> x, std::size_t rows, const GmmState& s, double reg,
                 std::vector<double>& resp) {
  const std::size_t d = s.d;
  std::vector<std::vector<double>> chol(s.k);
  std::vector<double> logdet(s.k);
  double penalty = 0.0;
  for (std::size_t k = 0; k < s.k; ++k) {
    chol[k] = cholesky_factor(std::span(s.cov).subspan(k * d * d, d * d), d);
    double ld = 0.0;
    for (std::size_t i = 0; i < d; ++i) ld += std::log(chol[k][i * d + i]);
    logdet[k] = 2.0 * ld;
    if (reg > 0.0) {
      // tr(Sigma^-1) = ||L^-1||_F^2
      for (std::size_t c = 0; c < d; ++c) {
        std::vector<double> y(d, 0.0);
        for (std::size_t i = c; i < d; ++i) {
          double v = (i == c) ? 1.0 : 0.0;
          for (std::size_t j = c; j < i; ++j) v -= chol[k][i * d + j] * y[j];
          y[i] = v / chol[k][i * d + i];
          penalty += y[i] * y[i] * 0.5 * reg;
        }
      }
    }
  }
  resp.assign(rows * s.k, 0.0);
  double ll = 0.0;
  std::vector<double> z(d);
  for (std::size_t n = 0; n < rows; ++n) {
    double* r = resp.data() + n * s.k;
    for (std::size_t k = 0; k < s.k; ++k) {
      double q = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        double v = x[n * d + i] - s.mu[k * d + i];
        for (std::size_t j = 0; j < i; ++j) v -= chol[k][i * d + j] * z[j];
        z[i] = v / chol[k][i * d + i];
        q += z[i] * z[i];
      }
      r[k] = (s.w[k] > 0.0 ? std::log(s.w[k]) : -1e300) - 0.5 * (static_cast<double>(d) * special::kLn2Pi + logdet[k] + q);
    }
    const double m = *std::max_element(r, r + s.k);
    double tot = 0.0;
    for (std::size_t k = 0; k < s.k; ++k) tot += (r[k] = std::exp(r[k] - m));
    for (std::size_t k = 0; k < s.k; ++k) r[k] /= tot;
    ll += m + std::log(tot);
  }
  return ll - penalty;
}

std::vector<double> global_covariance(std::span<const double> x, std::size_t rows, std::size_t d) {
  std::vector<double> mean(d, 0.0);
  for (std::size_t n = 0; n < rows; ++n)
    for (std::size_t i = 0; i < d; ++i) mean[i] += x[n * d + i];
  for (auto& m : mean) m /= static_cast<double>(rows);
  std::vector<double> cov(d * d, 0.0);
  for (std::size_t n = 0; n < rows; ++n)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += (x[n * d + i] - mean[i]) * (x[n * d + j] - mean[j]);
  for (auto& c : cov) c /= static_cast<double>(rows);
  return cov;
}

// M-step from (soft) responsibilities. Returns indices of dead components.
std::vector<std::size_t> gmm_mstep(std::span<const double> x, std::size_t rows,
                                   const std::vector<double>& resp, double reg, GmmState& s) {
  const std::size_t d = s.d;
  std::vector<std::size_t> dead;
  for (std::size_t k = 0; k < s.k; ++k) {
    double nk = 0.0;
    std::vector<double> mu(d, 0.0);
    for (std::size_t n = 0; n < rows; ++n) {
      const double r = resp[n * s.k + k];
      nk += r;
      for (std::size_t i = 0; i < d; ++i) mu[i] += r * x[n * d + i];
    }
    if (nk < 1e-8 * static_cast<double>(rows) || nk < 1e-10) {
      dead.push_back(k);
      continue;
    }
    for (auto& m : mu) m /= nk;
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t n = 0; n < rows; ++n) {
      const double r = resp[n * s.k + k];
      if (r == 0.0) continue;
      for (std::size_t i = 0; i < d; ++i) {
        const double di = x[n * d + i] - mu[i];
        for (std::size_t j = 0; j <= i; ++j) cov[i * d + j] += r * di * (x[n * d + j] - mu[j]);
      }
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const double v = cov[i * d + j] / nk + (i == j ? reg / nk : 0.0);
        cov[i * d + j] = v;
        cov[j * d + i] = v;
      }
    s.w[k] = nk / static_cast<double>(rows);
    std::copy(mu.begin(), mu.end(), s.mu.begin() + static_cast<std::ptrdiff_t>(k * d));
    std::copy(cov.begin(), cov.end(), s.cov.begin() + static_cast<std::ptrdiff_t>(k * d * d));
  }
  return dead;
}

void check_data(std::span<const double> data, std::size_t rows, std::size_t dim, std::size_t components) {
  if (dim == 0 || components == 0) throw ContractError("gmm: D and K must be positive");
  if (data.size() != rows * dim) throw ContractError("gmm: data size does not match rows x dim");
  if (rows < components) throw ContractError("gmm: need at least K rows");
}

GmmFit finish(GmmState s, std::vector<double> resp, std::vector<double> objective, std::size_t reseeds,
              double sigma_jitter_sq, double dof) {
  GmmFit fit;
  fit.raw = raw_from_moments(s.w, s.mu, s.cov, s.k, s.d, sigma_jitter_sq, dof);
  fit.weights = std::move(s.w);
  fit.means = std::move(s.mu);
  fit.covariances = std::move(s.cov);
  fit.resp = std::move(resp);
  fit.objective = std::move(objective);
  fit.reseeds = reseeds;
  return fit;
}

}  // namespace

GmmFit gmm_em_fit(std::span<const double> data, std::size_t rows, std::size_t dim,
                  std::size_t components, Rng& rng, double sigma_jitter_sq, const GmmOptions& opts) {
  check_data(data, rows, dim, components);
  const std::size_t d = dim;
  GmmState s;
  s.k = components;
  s.d = d;
  s.w.assign(components, 1.0 / static_cast<double>(components));
  s.mu.assign(components * d, 0.0);
  std::vector<double> gcov = global_covariance(data, rows, d);
  for (std::size_t i = 0; i < d; ++i) gcov[i * d + i] += std::max(opts.reg_covar, 1e-12);
  s.cov.clear();
  for (std::size_t k = 0; k < components; ++k) s.cov.insert(s.cov.end(), gcov.begin(), gcov.end());

  // k-means++ seeding
  std::vector<double> dist(rows, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(rows);
  for (std::size_t k = 0; k < components; ++k) {
    if (k > 0) {
      double total = std::accumulate(dist.begin(), dist.end(), 0.0);
      if (total <= 0.0) {
        pick = rng.below(rows);
      } else {
        double u = rng.uniform() * total;
        pick = rows - 1;
        for (std::size_t n = 0; n < rows; ++n) {
          u -= dist[n];
          if (u < 0.0) {
            pick = n;
            break;
          }
        }
      }
    }
    for (std::size_t i = 0; i < d; ++i) s.mu[k * d + i] = data[pick * d + i];
    for (std::size_t n = 0; n < rows; ++n) {
      double q = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double v = data[n * d + i] - s.mu[k * d + i];
        q += v * v;
      }
      dist[n] = std::min(dist[n], q);
    }
  }

  std::vector<double> resp;
  std::vector<double> objective;
  std::size_t reseeds = 0;
  double prev = 0.0;
  for (std::size_t it = 0;; ++it) {
    const double obj = gmm_estep(data, rows, s, opts.reg_covar, resp);
    objective.push_back(obj);
    if (it > 0 && (obj - prev) < opts.tol * static_cast<double>(rows)) break;
    if (it == opts.max_iters) break;
    prev = obj;
    const auto dead = gmm_mstep(data, rows, resp, opts.reg_covar, s);
    for (std::size_t k : dead) {
      const std::size_t r = rng.below(rows);
      for (std::size_t i = 0; i < d; ++i) s.mu[k * d + i] = data[r * d + i];
      std::copy(gcov.begin(), gcov.end(), s.cov.begin() + static_cast<std::ptrdiff_t>(k * d * d));
      s.w[k] = 1.0 / static_cast<double>(rows);
      ++reseeds;
    }
    if (!dead.empty()) {
      const double tw = std::accumulate(s.w.begin(), s.w.end(), 0.0);
      for (auto& w : s.w) w /= tw;
      prev = -std::numeric_limits<double>::infinity();
    }
  }
  return finish(std::move(s), std::move(resp), std::move(objective), reseeds, sigma_jitter_sq,
                opts.initial_dof);
}

GmmFit gmm_fit_from_labels(std::span<const double> data, std::size_t rows, std::size_t dim,
                           std::size_t components, std::span<const int> labels,
                           double sigma_jitter_sq, const GmmOptions& opts) {
  check_data(data, rows, dim, components);
  if (labels.size() != rows) throw ContractError("gmm_fit_from_labels: one label per row required");
  std::vector<double> resp(rows * components, 0.0);
  for (std::size_t n = 0; n < rows; ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= components) {
      throw ContractError("gmm_fit_from_labels: label out of range at row " + std::to_string(n));
    }
    resp[n * components + static_cast<std::size_t>(labels[n])] = 1.0;
  }
  GmmState s;
  s.k = components;
  s.d = dim;
  s.w.assign(components, 0.0);
  s.mu.assign(components * dim, 0.0);
  std::vector<double> gcov = global_covariance(data, rows, dim);
  for (std::size_t i = 0; i < dim; ++i) gcov[i * dim + i] += std::max(opts.reg_covar, 1e-12);
  s.cov.clear();
  for (std::size_t k = 0; k < components; ++k) s.cov.insert(s.cov.end(), gcov.begin(), gcov.end());
  const auto dead = gmm_mstep(data, rows, resp, opts.reg_covar, s);
  for (std::size_t k : dead) s.w[k] = 1.0 / static_cast<double>(rows);
  const double tw = std::accumulate(s.w.begin(), s.w.end(), 0.0);
  for (auto& w : s.w) w /= tw;
  return finish(std::move(s), std::move(resp), {}, 0, sigma_jitter_sq, opts.initial_dof);
}

}  // namespace tvae
