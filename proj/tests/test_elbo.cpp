#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fd_check.hpp"
#include "tvae/distributions.hpp"
#include "tvae/elbo.hpp"
#include "tvae/errors.hpp"
#include "tvae/mixture.hpp"
#include "tvae/special.hpp"

using namespace tvae;

namespace {

struct Toy {
  ModelDims dims;
  ParamSet params;
  Tensor o;
  Tensor eps;
};

Toy make_toy(std::uint64_t seed, std::size_t l = 4, std::size_t h = 8, std::size_t d = 2, std::size_t k = 3,
             std::size_t n = 6, std::size_t t = 1) {
  Toy toy;
  toy.dims.encoder.layer_dims = {l, h, d};
  toy.dims.decoder.layer_dims = {d, h, l};
  toy.dims.encoder.activation = toy.dims.decoder.activation = Activation::tanh;
  toy.dims.components = k;
  toy.dims.latent_dim = d;
  toy.dims.observed_dim = l;
  Rng rng(seed);
  init_mlp(toy.params, "enc", toy.dims.encoder, rng);
  init_mlp(toy.params, "dec", toy.dims.decoder, rng);
  for (auto& [name, block] : toy.params)
    for (auto& v : block.values) v += 0.1 * rng.normal();
  SmmRawParams raw;
  raw.components = k;
  raw.dim = d;
  raw.sigma_jitter_sq = 0.1;
  for (std::size_t c = 0; c < k; ++c) {
    raw.m.push_back(0.3 * rng.normal());
    raw.n.push_back(preactivation_from_dof(3.0 + 0.5 * std::fabs(rng.normal())));
    for (std::size_t j = 0; j < d; ++j) raw.mu.push_back(0.5 * rng.normal());
    for (std::size_t j = 0; j < d * (d - 1) / 2; ++j) raw.c_lower.push_back(0.2 * rng.normal());
    for (std::size_t j = 0; j < d; ++j) raw.c_logdiag.push_back(0.2 * rng.normal() - 0.5);
  }
  raw.store(toy.params);
  std::vector<double> o(n * l);
  for (auto& v : o) v = rng.normal();
  toy.o = Tensor::constant({n, l}, o);
  toy.eps = sample_standard_normal(rng, {t, n, d});
  return toy;
}

LossOutput run(const Toy& toy, const LeafMap& leaves, const LossOptions& opts, const std::vector<int>* labels = nullptr) {
  return loss_batch(toy.o, leaves, toy.dims, opts, toy.eps, labels);
}

void check_gradients(const Toy& toy, const LossOptions& opts, const std::vector<int>* labels = nullptr) {
  const auto errs = testing_fd::max_rel_error(toy.params, [&](const LeafMap& l) { return run(toy, l, opts, labels).loss; });
  for (const auto& [name, err] : errs) {
    INFO(name << " relative error " << err);
    CHECK(err < 1e-4);
  }
}

}  // namespace

TEST_CASE("reconstruction term") {
  DecoderStats zero{Tensor::zeros({1, 1}), Tensor::zeros({1, 1}), 1};
  CHECK(reconstruction_term(Tensor::zeros({1, 1}), zero).item() ==
        doctest::Approx(-0.5 * special::kLn2Pi).epsilon(1e-15));

  const DecoderStats one{Tensor::constant({2, 2}, {0.1, 0.2, -0.4, 0.3}), Tensor::constant({2, 2}, {0.2, -0.1, 0.0, 0.4}), 1};
  const DecoderStats twice{Tensor::constant({4, 2}, {0.1, 0.2, -0.4, 0.3, 0.1, 0.2, -0.4, 0.3}),
                           Tensor::constant({4, 2}, {0.2, -0.1, 0.0, 0.4, 0.2, -0.1, 0.0, 0.4}), 2};
  const Tensor o = Tensor::constant({2, 2}, {0.5, -0.5, 1.0, 0.0});
  const auto a = reconstruction_term(o, one).to_vector();
  const auto b = reconstruction_term(o, twice).to_vector();
  for (std::size_t i = 0; i < 2; ++i) CHECK(std::fabs(a[i] - b[i]) < 1e-14);

  Rng rng(3);
  const std::size_t t = 3, n = 4, l = 5;
  std::vector<double> mu(t * n * l), ls(t * n * l), ov(n * l);
  for (auto& v : mu) v = rng.normal();
  for (auto& v : ls) v = 0.3 * rng.normal();
  for (auto& v : ov) v = rng.normal();
  const DecoderStats dec{Tensor::constant({t * n, l}, mu), Tensor::constant({t * n, l}, ls), t};
  const auto got = reconstruction_term(Tensor::constant({n, l}, ov), dec).to_vector();
  for (std::size_t i = 0; i < n; ++i) {
    double want = 0.0;
    for (std::size_t s = 0; s < t; ++s) {
      DiagGaussian g;
      for (std::size_t j = 0; j < l; ++j) {
        g.mean.push_back(mu[(s * n + i) * l + j]);
        g.log_std.push_back(ls[(s * n + i) * l + j]);
      }
      want += gaussian_diag_log_pdf(std::span<const double>(ov).subspan(i * l, l), g) / static_cast<double>(t);
    }
    CHECK(std::fabs(got[i] - want) < 1e-12);
  }
}

TEST_CASE("encoder entropy agrees with the distribution module") {
  const EncoderStats enc{Tensor::zeros({2, 3}), Tensor::constant({2, 3}, {0.1, -0.3, 0.2, 0.0, 0.5, -1.0})};
  const auto h = encoder_entropy(enc).to_vector();
  CHECK(h[0] == doctest::Approx(gaussian_diag_entropy({{0, 0, 0}, {0.1, -0.3, 0.2}})).epsilon(1e-14));
  CHECK(h[1] == doctest::Approx(gaussian_diag_entropy({{0, 0, 0}, {0.0, 0.5, -1.0}})).epsilon(1e-14));
}

TEST_CASE("label weights") {
  const auto w = label_weights({2, 0, 1}, 3);
  CHECK(w.to_vector() == std::vector<double>{0, 0, 1, 1, 0, 0, 0, 1, 0});
  CHECK_THROWS_AS(label_weights({0, kUnlabeled}, 2), ContractError);
  CHECK_THROWS_AS(label_weights({3}, 2), ContractError);
  const Tensor fallback = Tensor::constant({2, 2}, {0.5, 0.5, 0.3, 0.7});
  const auto f = label_weights({0, kUnlabeled}, 2, &fallback).to_vector();
  CHECK(f == std::vector<double>{1, 0, 0.3, 0.7});
  for (std::size_t n = 0; n < 2; ++n) CHECK(f[2 * n] + f[2 * n + 1] == doctest::Approx(1.0));
}

TEST_CASE("breakdown totals and the single-component cross term") {
  const Toy toy = make_toy(1, 4, 8, 2, 1, 5);
  LossOptions opts;
  const auto out = run(toy, make_leaves(toy.params), opts);
  const auto parts = breakdown(out.terms);
  REQUIRE(parts.size() == 5);
  for (std::size_t n = 0; n < 5; ++n) {
    CHECK(std::fabs(parts[n].total - (parts[n].recon + parts[n].enc_entropy + parts[n].cross_entropy)) < 1e-12);
    CHECK(parts[n].cross_entropy == doctest::Approx(out.posterior.log_rho.at(n, 0)).epsilon(1e-14));
  }
  double mean_total = 0.0;
  for (const auto& p : parts) mean_total += p.total / 5.0;
  CHECK(out.loss.item() == doctest::Approx(-mean_total).epsilon(1e-13));
}

TEST_CASE("supervised with labels equal to a one-hot posterior matches unsupervised") {
  Toy toy = make_toy(2, 4, 8, 2, 2, 6);
  // Every row encodes onto the second of two far-apart components, so gamma is one-hot.
  toy.params.at(kMixMean).values = {-1e6, 0.0, 1e6, 0.0};
  toy.params.at("enc.bls").values = {-4.0, -4.0};
  toy.params.at("enc.bmu").values = {1e6, 0.0};
  auto& w = toy.params.at("enc.Wmu").values;
  std::fill(w.begin(), w.end(), 0.0);
  const auto leaves = make_leaves(toy.params);
  LossOptions opts;
  const auto un = run(toy, leaves, opts);
  const auto labels = argmax_rows(un.posterior.gamma);
  for (std::size_t n = 0; n < 6; ++n) {
    INFO("gap " << 1.0 - un.posterior.gamma.at(n, static_cast<std::size_t>(labels[n])));
    REQUIRE(un.posterior.gamma.at(n, static_cast<std::size_t>(labels[n])) > 1 - 1e-12);
  }
  opts.mode = TrainingMode::supervised;
  const auto sup = run(toy, leaves, opts, &labels);
  CHECK(std::fabs(sup.loss.item() - un.loss.item()) < 1e-9);
}

// With nu -> infinity, ln rho tends to E_q[ln N(x; mu, Sigma)] - H(Gamma(nu/2, nu/2)).
// The second part depends on nu alone, so the bound equals the standard VAE
// bound up to 1/2 ln(nu/2) - 1/2 ln(2 pi) - 1/2.
TEST_CASE("Gaussian limit matches a standard VAE bound") {
  Toy toy = make_toy(3, 3, 6, 2, 1, 8, 2);
  toy.params.at(kMixDof).values = {preactivation_from_dof(1e6)};
  const auto out = run(toy, make_leaves(toy.params), LossOptions{});
  const SmmParams p = materialize_params(SmmRawParams::load(toy.params, 0.1));
  const auto sigma = p.sigma(0);
  const double det = sigma[0] * sigma[3] - sigma[1] * sigma[2];
  const double inv[4] = {sigma[3] / det, -sigma[1] / det, -sigma[2] / det, sigma[0] / det};
  const auto parts = breakdown(out.terms);
  const double offset = 0.5 * std::log(0.5 * p.nu[0]) - 0.5 * special::kLn2Pi - 0.5;
  for (std::size_t n = 0; n < 8; ++n) {
    // E_q[ln N(x; mu_1, Sigma_1)] for q = N(mu_n, diag s_n^2).
    const double m[2] = {out.encoder.mu_x.at(n, 0) - p.mu[0], out.encoder.mu_x.at(n, 1) - p.mu[1]};
    const double s0 = std::exp(2 * out.encoder.log_std_x.at(n, 0)), s1 = std::exp(2 * out.encoder.log_std_x.at(n, 1));
    const double quad = m[0] * (inv[0] * m[0] + inv[1] * m[1]) + m[1] * (inv[2] * m[0] + inv[3] * m[1]);
    const double cross = -special::kLn2Pi - 0.5 * std::log(det) - 0.5 * (s0 * inv[0] + s1 * inv[3] + quad);
    const double entropy = special::kLn2Pi + 1.0 + out.encoder.log_std_x.at(n, 0) + out.encoder.log_std_x.at(n, 1);
    CHECK(std::fabs(parts[n].cross_entropy - offset - cross) < 1e-3);
    CHECK(std::fabs(parts[n].enc_entropy - entropy) < 1e-12);
    CHECK(std::fabs(parts[n].total - offset - (parts[n].recon + entropy + cross)) < 1e-3);
  }
}

TEST_CASE("l1 penalty") {
  const Toy toy = make_toy(4);
  const auto leaves = make_leaves(toy.params);
  double want = 0.0;
  for (const auto& [name, block] : toy.params) {
    if (name.rfind("mix.", 0) == 0) continue;
    for (double v : block.values) want += std::fabs(v);
  }
  CHECK(l1_penalty(leaves).item() == doctest::Approx(want).epsilon(1e-13));

  LossOptions opts;
  const double base = run(toy, leaves, opts).loss.item();
  opts.l1_coeff = 0.01;
  const double one = run(toy, leaves, opts).loss.item();
  opts.l1_coeff = 0.02;
  const double two = run(toy, leaves, opts).loss.item();
  CHECK((one - base) == doctest::Approx(0.01 * want).epsilon(1e-10));
  CHECK((two - base) == doctest::Approx(2.0 * (one - base)).epsilon(1e-10));
}

TEST_CASE("an added constant changes the value but not the gradients") {
  const Toy toy = make_toy(5);
  LossOptions opts;
  const auto a = evaluate_and_grad(run(toy, make_leaves(toy.params), opts).loss);
  opts.constant = 12.5;
  const auto b = evaluate_and_grad(run(toy, make_leaves(toy.params), opts).loss);
  CHECK(b.value == doctest::Approx(a.value + 12.5).epsilon(1e-14));
  for (const auto& [name, g] : a.grads) CHECK(g.to_vector() == b.grads.at(name).to_vector());
}

TEST_CASE("loss is deterministic with frozen noise") {
  const Toy toy = make_toy(6);
  const auto a = evaluate_and_grad(run(toy, make_leaves(toy.params), LossOptions{}).loss);
  const auto b = evaluate_and_grad(run(toy, make_leaves(toy.params), LossOptions{}).loss);
  CHECK(a.value == b.value);
  for (const auto& [name, g] : a.grads) CHECK(g.to_vector() == b.grads.at(name).to_vector());
}

TEST_CASE("full-loss gradients match finite differences in every mode") {
  const Toy toy = make_toy(7);
  LossOptions opts;
  opts.l1_coeff = 0.01;
  SUBCASE("unsupervised") { check_gradients(toy, opts); }
  const std::vector<int> labels = {0, 2, 1, 1, 0, 2};
  SUBCASE("supervised weights") {
    opts.mode = TrainingMode::supervised;
    check_gradients(toy, opts, &labels);
  }
  SUBCASE("supervised posterior") {
    opts.mode = TrainingMode::supervised;
    opts.target = SupervisedTarget::posterior;
    check_gradients(toy, opts, &labels);
  }
  const std::vector<int> partial = {0, kUnlabeled, 1, kUnlabeled, 0, 2};
  SUBCASE("semi-supervised weights") {
    opts.mode = TrainingMode::semi_supervised;
    check_gradients(toy, opts, &partial);
  }
  SUBCASE("semi-supervised posterior") {
    opts.mode = TrainingMode::semi_supervised;
    opts.target = SupervisedTarget::posterior;
    check_gradients(toy, opts, &partial);
  }
  SUBCASE("two samples per observation") {
    const Toy t2 = make_toy(8, 4, 8, 2, 3, 6, 2);
    check_gradients(t2, opts);
  }
}

TEST_CASE("detached responsibilities act as fixed weights") {
  const Toy toy = make_toy(11);
  LossOptions opts;
  opts.detach_gamma = true;
  const auto leaves = make_leaves(toy.params);
  const auto out = run(toy, leaves, opts);
  const auto detached = evaluate_and_grad(out.loss);
  const Tensor fixed = Tensor::constant(out.posterior.gamma.shape(), out.posterior.gamma.to_vector());
  const auto weighted = evaluate_and_grad(loss_batch(toy.o, leaves, toy.dims, LossOptions{}, toy.eps, nullptr, &fixed).loss);
  CHECK(detached.value == doctest::Approx(weighted.value).epsilon(1e-14));
  for (const auto& [name, g] : detached.grads) {
    const auto a = g.to_vector();
    const auto b = weighted.grads.at(name).to_vector();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  opts.detach_gamma = false;
  const auto attached = evaluate_and_grad(run(toy, leaves, opts).loss);
  CHECK(attached.grads.at(kMixMean).to_vector() != detached.grads.at(kMixMean).to_vector());
}

TEST_CASE("pretraining loss gradients match finite differences") {
  Toy toy = make_toy(9);
  ParamSet nets;
  for (const auto& [name, block] : toy.params)
    if (name.rfind("mix.", 0) != 0) nets[name] = block;
  const auto errs = testing_fd::max_rel_error(nets, [&](const LeafMap& l) {
    return pretrain_loss_batch(toy.o, l, toy.dims, kLogStdClamp, 0.1, toy.eps);
  });
  for (const auto& [name, err] : errs) {
    INFO(name);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("supervised modes require labels") {
  const Toy toy = make_toy(10);
  const auto leaves = make_leaves(toy.params);
  LossOptions opts;
  opts.mode = TrainingMode::supervised;
  CHECK_THROWS_AS(run(toy, leaves, opts), ContractError);
  const std::vector<int> partial = {0, kUnlabeled, 1, 1, 0, 2};
  CHECK_THROWS_AS(run(toy, leaves, opts, &partial), ContractError);
  opts.target = SupervisedTarget::posterior;
  CHECK_THROWS_AS(run(toy, leaves, opts, &partial), ContractError);
  const std::vector<int> short_labels = {0, 1};
  CHECK_THROWS_AS(run(toy, leaves, opts, &short_labels), ContractError);
  CHECK_THROWS_AS(loss_batch(Tensor::zeros({2, 3}), leaves, toy.dims, LossOptions{}, toy.eps), ContractError);
}

TEST_CASE("mode names") {
  CHECK(parse_training_mode("semi_supervised") == TrainingMode::semi_supervised);
  CHECK(to_string(TrainingMode::supervised) == "supervised");
  CHECK(parse_supervised_target("posterior") == SupervisedTarget::posterior);
  CHECK(to_string(SupervisedTarget::weights) == "weights");
  CHECK_THROWS(parse_training_mode("semi"));
  CHECK_THROWS(parse_supervised_target("labels"));
}
