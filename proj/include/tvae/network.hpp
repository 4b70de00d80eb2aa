#pragma once

// Encoder and decoder MLPs with Gaussian output heads, and the
// reparameterized latent sampler.

#include <cstddef>
#include <string>
#include <vector>

#include "tvae/params.hpp"
#include "tvae/rng.hpp"
#include "tvae/tensor.hpp"

namespace tvae {

enum class Activation { relu, tanh };

Activation parse_activation(const std::string& s);
std::string to_string(Activation a);

/// Layer widths from input to output. The last width is the size of each of
/// the two output heads; every earlier transition is an activated trunk layer.
struct MlpConfig {
  std::vector<std::size_t> layer_dims;
  Activation activation = Activation::relu;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  void validate() const;
};

/// mu and log sigma of q(x|o), one row per observation (N x D).
struct EncoderStats {
  Tensor mu_x;
  Tensor log_std_x;
};

/// mu and log sigma of p(o|x) for T samples per observation, stored as
/// (T*N) x L with sample-major row order (row t*N + n).
struct DecoderStats {
  Tensor mu_o;
  Tensor log_std_o;
  std::size_t samples = 1;
};

/// Default log-sigma clamp range applied to both networks.
inline constexpr double kLogStdClamp = 7.0;

/// Glorot-uniform weights and zero biases under "<prefix>.W<i>", "<prefix>.b<i>",
/// "<prefix>.Wmu", "<prefix>.bmu", "<prefix>.Wls", "<prefix>.bls".
void init_mlp(ParamSet& params, const std::string& prefix, const MlpConfig& cfg, Rng& rng);

struct GaussianHeads {
  Tensor mu;
  Tensor log_std;
};

GaussianHeads mlp_forward(const LeafMap& leaves, const std::string& prefix, const MlpConfig& cfg,
                          const Tensor& input, double log_std_clamp = kLogStdClamp);

EncoderStats encoder_forward(const Tensor& o, const LeafMap& leaves, const MlpConfig& cfg,
                             double log_std_clamp = kLogStdClamp);

/// x is (T*N) x D (any shape folding to that matrix view).
DecoderStats decoder_forward(const Tensor& x, std::size_t samples, const LeafMap& leaves,
                             const MlpConfig& cfg, double log_std_clamp = kLogStdClamp);

/// x_{n,t} = mu_n + exp(log_std_n) * eps_{t,n}; eps has shape T x N x D.
Tensor reparameterize(const EncoderStats& enc, const Tensor& eps);

/// Names of the weight and bias blocks of a network, in layer order.
std::vector<std::string> mlp_param_names(const std::string& prefix, const MlpConfig& cfg);

}  // namespace tvae
