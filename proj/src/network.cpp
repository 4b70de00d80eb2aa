#include "tvae/network.hpp"

#include <cmath>

#include "tvae/errors.hpp"

namespace tvae {

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw FormatError("unknown activation '" + s + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

void MlpConfig::validate() const {
  if (layer_dims.size() < 2) throw ContractError("MlpConfig: need at least input and output widths");
  for (auto d : layer_dims) {
    if (d == 0) throw ContractError("MlpConfig: layer widths must be positive");
  }
}

namespace {

void glorot(ParamSet& params, const std::string& wname, const std::string& bname, std::size_t in,
            std::size_t out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (auto& x : w) x = (2.0 * rng.uniform() - 1.0) * limit;
  params[wname] = ParamBlock{{in, out}, std::move(w)};
  params[bname] = ParamBlock{{1, out}, std::vector<double>(out, 0.0)};
}

Tensor affine(const LeafMap& leaves, const std::string& w, const std::string& b, const Tensor& x) {
  return add(matmul(x, leaf(leaves, w)), leaf(leaves, b));
}

}  // namespace

std::vector<std::string> mlp_param_names(const std::string& prefix, const MlpConfig& cfg) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i + 2 < cfg.layer_dims.size(); ++i) {
    names.push_back(prefix + ".W" + std::to_string(i));
    names.push_back(prefix + ".b" + std::to_string(i));
  }
  for (const char* head : {"mu", "ls"}) {
    names.push_back(prefix + ".W" + head);
    names.push_back(prefix + ".b" + head);
  }
  return names;
}

void init_mlp(ParamSet& params, const std::string& prefix, const MlpConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto& dims = cfg.layer_dims;
  for (std::size_t i = 0; i + 2 < dims.size(); ++i) {
    glorot(params, prefix + ".W" + std::to_string(i), prefix + ".b" + std::to_string(i), dims[i],
           dims[i + 1], rng);
  }
  const std::size_t h = dims[dims.size() - 2];
  glorot(params, prefix + ".Wmu", prefix + ".bmu", h, dims.back(), rng);
  glorot(params, prefix + ".Wls", prefix + ".bls", h, dims.back(), rng);
}

GaussianHeads mlp_forward(const LeafMap& leaves, const std::string& prefix, const MlpConfig& cfg,
                          const Tensor& input, double log_std_clamp) {
  cfg.validate();
  if (input.cols() != cfg.input_dim()) {
    throw ContractError(prefix + ": input has " + std::to_string(input.cols()) + " columns, expected " +
                        std::to_string(cfg.input_dim()));
  }
  Tensor h = input;
  for (std::size_t i = 0; i + 2 < cfg.layer_dims.size(); ++i) {
    h = affine(leaves, prefix + ".W" + std::to_string(i), prefix + ".b" + std::to_string(i), h);
    h = cfg.activation == Activation::relu ? relu(h) : tanh(h);
  }
  Tensor mu = affine(leaves, prefix + ".Wmu", prefix + ".bmu", h);
  Tensor ls = affine(leaves, prefix + ".Wls", prefix + ".bls", h);
  return {mu, clamp(ls, -log_std_clamp, log_std_clamp)};
}

EncoderStats encoder_forward(const Tensor& o, const LeafMap& leaves, const MlpConfig& cfg,
                             double log_std_clamp) {
  auto heads = mlp_forward(leaves, "enc", cfg, o, log_std_clamp);
  return {heads.mu, heads.log_std};
}

DecoderStats decoder_forward(const Tensor& x, std::size_t samples, const LeafMap& leaves,
                             const MlpConfig& cfg, double log_std_clamp) {
  if (samples == 0 || x.rows() % samples != 0) {
    throw ContractError("decoder_forward: row count not divisible by sample count");
  }
  auto heads = mlp_forward(leaves, "dec", cfg, x, log_std_clamp);
  return {heads.mu, heads.log_std, samples};
}

Tensor reparameterize(const EncoderStats& enc, const Tensor& eps) {
  const std::size_t n = enc.mu_x.rows();
  const std::size_t d = enc.mu_x.cols();
  const auto& s = eps.shape();
  if (s.size() != 3 || s[1] != n || s[2] != d) {
    throw ContractError("reparameterize: eps shape " + shape_str(s) + " does not conform to T x " +
                        std::to_string(n) + " x " + std::to_string(d));
  }
  const std::size_t t = s[0];
  const Tensor noise = reshape(eps, {t * n, d});
  return add(tile_rows(enc.mu_x, t), mul(exp(tile_rows(enc.log_std_x, t)), noise));
}

}  // namespace tvae
