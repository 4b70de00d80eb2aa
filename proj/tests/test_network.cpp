#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "tvae/distributions.hpp"
#include "tvae/errors.hpp"
#include "tvae/network.hpp"

using namespace tvae;

namespace {

MlpConfig config(std::vector<std::size_t> dims, Activation a = Activation::tanh) {
  MlpConfig c;
  c.layer_dims = std::move(dims);
  c.activation = a;
  return c;
}

ParamSet zero_params(const std::string& prefix, const MlpConfig& cfg) {
  ParamSet ps;
  Rng rng(0);
  init_mlp(ps, prefix, cfg, rng);
  for (auto& [name, block] : ps) std::fill(block.values.begin(), block.values.end(), 0.0);
  return ps;
}

Tensor random_input(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<double> v(n * d);
  for (auto& x : v) x = rng.normal();
  return Tensor::constant({n, d}, v);
}

}  // namespace

TEST_CASE("initialization") {
  const auto cfg = config({3, 5, 4, 2});
  ParamSet ps;
  Rng rng(1);
  init_mlp(ps, "enc", cfg, rng);
  CHECK(ps.size() == 8);
  CHECK(ps.at("enc.W0").shape == Shape{3, 5});
  CHECK(ps.at("enc.W1").shape == Shape{5, 4});
  CHECK(ps.at("enc.Wmu").shape == Shape{4, 2});
  CHECK(ps.at("enc.Wls").shape == Shape{4, 2});
  for (double b : ps.at("enc.b0").values) CHECK(b == 0.0);
  const double limit = std::sqrt(6.0 / (3 + 5));
  for (double w : ps.at("enc.W0").values) CHECK(std::fabs(w) <= limit);
  CHECK(mlp_param_names("enc", cfg).size() == 8);

  ParamSet again;
  Rng rng2(1);
  init_mlp(again, "enc", cfg, rng2);
  CHECK(again.at("enc.W1").values == ps.at("enc.W1").values);

  CHECK_THROWS_AS(config({3}).validate(), ContractError);
  CHECK_THROWS_AS(config({3, 0, 2}).validate(), ContractError);
  CHECK(parse_activation("relu") == Activation::relu);
  CHECK(to_string(Activation::tanh) == "tanh");
  CHECK_THROWS_AS(parse_activation("sigmoid"), FormatError);
}

TEST_CASE("zero weights give a standard normal output") {
  const auto enc_cfg = config({3, 4, 2});
  const auto enc = encoder_forward(Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6}),
                                   make_leaves(zero_params("enc", enc_cfg)), enc_cfg);
  for (double v : enc.mu_x.to_vector()) CHECK(v == 0.0);
  for (double v : enc.log_std_x.to_vector()) CHECK(v == 0.0);

  const auto dec_cfg = config({2, 4, 3});
  const auto dec = decoder_forward(Tensor::constant({2, 2}, {1, 2, 3, 4}), 1,
                                   make_leaves(zero_params("dec", dec_cfg)), dec_cfg);
  for (double v : dec.mu_o.to_vector()) CHECK(v == 0.0);
  for (double v : dec.log_std_o.to_vector()) CHECK(v == 0.0);
}

TEST_CASE("dimension mismatches are rejected") {
  const auto cfg = config({3, 4, 2});
  Rng rng(2);
  ParamSet ps;
  init_mlp(ps, "enc", cfg, rng);
  CHECK_THROWS_AS(encoder_forward(Tensor::zeros({2, 4}), make_leaves(ps), cfg), ContractError);
  const EncoderStats e{Tensor::zeros({2, 2}), Tensor::zeros({2, 2})};
  CHECK_THROWS_AS(reparameterize(e, Tensor::zeros({1, 3, 2})), ContractError);
}

TEST_CASE("identical rows give identical outputs and permutations commute") {
  const auto cfg = config({3, 6, 2}, Activation::relu);
  Rng rng(3);
  ParamSet ps;
  init_mlp(ps, "enc", cfg, rng);
  const auto leaves = make_leaves(ps);
  const auto same = encoder_forward(Tensor::constant({2, 3}, {0.1, -0.2, 0.3, 0.1, -0.2, 0.3}), leaves, cfg);
  CHECK(same.mu_x.at(0, 0) == same.mu_x.at(1, 0));
  CHECK(same.log_std_x.at(0, 1) == same.log_std_x.at(1, 1));

  const auto dcfg = config({2, 5, 3});
  ParamSet dp;
  init_mlp(dp, "dec", dcfg, rng);
  const Tensor x = random_input(rng, 4, 2);
  const Tensor xp = Tensor::constant({4, 2}, {x.at(2, 0), x.at(2, 1), x.at(0, 0), x.at(0, 1), x.at(3, 0), x.at(3, 1),
                                              x.at(1, 0), x.at(1, 1)});
  const auto a = decoder_forward(x, 1, make_leaves(dp), dcfg);
  const auto b = decoder_forward(xp, 1, make_leaves(dp), dcfg);
  const int perm[] = {2, 0, 3, 1};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(b.mu_o.at(i, j) == a.mu_o.at(static_cast<std::size_t>(perm[i]), j));
      CHECK(b.log_std_o.at(i, j) == a.log_std_o.at(static_cast<std::size_t>(perm[i]), j));
    }
}

TEST_CASE("log-std clamp") {
  const auto cfg = config({1, 2});
  ParamSet ps = zero_params("enc", cfg);
  ps.at("enc.bls").values = {20.0, -20.0};
  const auto e = encoder_forward(Tensor::zeros({1, 1}), make_leaves(ps), cfg, 7.0);
  CHECK(e.log_std_x.at(0, 0) == 7.0);
  CHECK(e.log_std_x.at(0, 1) == -7.0);
}

TEST_CASE("encoder gradients match finite differences") {
  const auto cfg = config({3, 4, 2});
  Rng rng(4);
  ParamSet ps;
  init_mlp(ps, "enc", cfg, rng);
  for (auto& [name, block] : ps)
    for (auto& v : block.values) v += 0.1 * rng.normal();
  const Tensor o = random_input(rng, 5, 3);
  const Tensor w = random_input(rng, 5, 2);
  const auto errs = testing_fd::max_rel_error(ps, [&](const LeafMap& l) {
    const auto e = encoder_forward(o, l, cfg);
    return sum(add(mul(e.mu_x, w), square(e.log_std_x)));
  });
  for (const auto& [name, err] : errs) {
    INFO(name);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("encoder, sampler and decoder chain matches finite differences") {
  const auto ecfg = config({3, 4, 2});
  const auto dcfg = config({2, 4, 3});
  Rng rng(5);
  ParamSet ps;
  init_mlp(ps, "enc", ecfg, rng);
  init_mlp(ps, "dec", dcfg, rng);
  for (auto& [name, block] : ps)
    for (auto& v : block.values) v += 0.1 * rng.normal();
  const Tensor o = random_input(rng, 4, 3);
  const Tensor eps = sample_standard_normal(rng, {2, 4, 2});
  const Tensor w = random_input(rng, 8, 3);
  const auto errs = testing_fd::max_rel_error(ps, [&](const LeafMap& l) {
    const auto e = encoder_forward(o, l, ecfg);
    const auto d = decoder_forward(reparameterize(e, eps), 2, l, dcfg);
    return sum(add(mul(d.mu_o, w), exp(d.log_std_o)));
  });
  for (const auto& [name, err] : errs) {
    INFO(name);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("reparameterization") {
  const EncoderStats e{Tensor::constant({2, 2}, {1.0, 2.0, -1.0, 0.5}), Tensor::zeros({2, 2})};
  CHECK(reparameterize(e, Tensor::zeros({1, 2, 2})).to_vector() == e.mu_x.to_vector());
  const auto shifted = reparameterize(e, Tensor::constant({1, 2, 2}, std::vector<double>(4, 1.0))).to_vector();
  CHECK(shifted == std::vector<double>{2.0, 3.0, 0.0, 1.5});

  const EncoderStats one{Tensor::constant({1, 2}, {0.7, -1.2}), Tensor::constant({1, 2}, {std::log(0.5), 0.3})};
  Rng rng(6);
  const std::size_t t = 100000;
  const auto x = reparameterize(one, sample_standard_normal(rng, {t, 1, 2}));
  for (std::size_t d = 0; d < 2; ++d) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < t; ++i) m += x.at(i, d);
    m /= static_cast<double>(t);
    for (std::size_t i = 0; i < t; ++i) v += (x.at(i, d) - m) * (x.at(i, d) - m);
    const double s = std::sqrt(v / static_cast<double>(t));
    const double want_s = std::exp(one.log_std_x.at(0, d));
    CHECK(std::fabs(m - one.mu_x.at(0, d)) < 0.01 * std::max(1.0, std::fabs(one.mu_x.at(0, d))));
    CHECK(std::fabs(s - want_s) < 0.01 * want_s);
  }
}
