#pragma once

// Per-observation lower bound and the batch loss
//   J = -(1/N) sum_n ELBO_n + l1 * sum |w|  (encoder and decoder blocks only)
// with
//   ELBO_n = recon_n + H(q(x|o_n)) + sum_k w_nk ln rho_nk.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tvae/mixture.hpp"
#include "tvae/network.hpp"
#include "tvae/params.hpp"
#include "tvae/tensor.hpp"

namespace tvae {

enum class TrainingMode { unsupervised, supervised, semi_supervised };

TrainingMode parse_training_mode(const std::string& s);
std::string to_string(TrainingMode m);

/// How labels enter the supervised bound.
///   weights:   one-hot labels replace gamma as the weights of ln rho.
///   posterior: the weight term becomes ln gamma_{n, y_n}.
enum class SupervisedTarget { weights, posterior };

SupervisedTarget parse_supervised_target(const std::string& s);
std::string to_string(SupervisedTarget t);

/// Label value marking an unlabeled row.
inline constexpr int kUnlabeled = -1;

struct ElboBreakdown {
  double recon = 0.0;
  double enc_entropy = 0.0;
  double cross_entropy = 0.0;
  double total = 0.0;
};

/// Per-observation terms as N x 1 graph tensors.
struct ElboTerms {
  Tensor recon;
  Tensor enc_entropy;
  Tensor cross_entropy;
  Tensor total;
};

/// (1/T) sum_t ln N(o_n | mu_{n,t}, diag sigma_{n,t}^2), N x 1.
Tensor reconstruction_term(const Tensor& o, const DecoderStats& dec);

/// D/2 ln(2 pi e) + sum_d log_std_nd, N x 1.
Tensor encoder_entropy(const EncoderStats& enc);

/// N x K one-hot rows; rows with kUnlabeled take the matching row of
/// `fallback` when given and are an error otherwise.
Tensor label_weights(const std::vector<int>& labels, std::size_t components,
                     const Tensor* fallback = nullptr);

ElboTerms elbo_terms(const Tensor& o, const EncoderStats& enc, const DecoderStats& dec,
                     const Tensor& log_rho, const Tensor& weights);

/// Same, with a precomputed N x 1 cross-entropy term.
ElboTerms elbo_terms(const Tensor& o, const EncoderStats& enc, const DecoderStats& dec,
                     const Tensor& cross_entropy);

std::vector<ElboBreakdown> breakdown(const ElboTerms& terms);

/// Sum of |w| over every leaf whose name starts with "enc." or "dec.".
Tensor l1_penalty(const LeafMap& leaves);

struct ModelDims {
  MlpConfig encoder;
  MlpConfig decoder;
  std::size_t components = 0;
  std::size_t latent_dim = 0;
  std::size_t observed_dim = 0;
};

struct LossOptions {
  TrainingMode mode = TrainingMode::unsupervised;
  SupervisedTarget target = SupervisedTarget::weights;
  double l1_coeff = 0.0;
  double sigma_jitter_sq = 0.1;
  double log_std_clamp = kLogStdClamp;
  bool detach_gamma = false;
  /// Added to -mean(ELBO); stands for the dropped E[ln q(u, z)] term.
  double constant = 0.0;
};

struct LossOutput {
  Tensor loss;
  ElboTerms terms;
  PosteriorStats posterior;
  EncoderStats encoder;
};

/// Builds the loss graph for one batch. `eps` is T x N x D standard normal
/// noise. `labels` must have N entries in supervised mode (kUnlabeled rows fall
/// back to gamma in semi-supervised mode). `fixed_weights`, when non-null,
/// overrides the cross-entropy weights (warm start).
LossOutput loss_batch(const Tensor& o, const LeafMap& leaves, const ModelDims& dims,
                      const LossOptions& opts, const Tensor& eps,
                      const std::vector<int>* labels = nullptr,
                      const Tensor* fixed_weights = nullptr);

/// Pretraining loss: reconstruction through x = mu + std * eps with a fixed
/// posterior std, plus 0.5 |mu|^2 per row; mean over the batch.
Tensor pretrain_loss_batch(const Tensor& o, const LeafMap& leaves, const ModelDims& dims,
                           double log_std_clamp, double std, const Tensor& eps);

}  // namespace tvae
