#include "tvae/elbo.hpp"

#include <cmath>

#include "tvae/errors.hpp"
#include "tvae/special.hpp"

namespace tvae {

TrainingMode parse_training_mode(const std::string& s) {
  if (s == "unsupervised") return TrainingMode::unsupervised;
  if (s == "supervised") return TrainingMode::supervised;
  if (s == "semi_supervised") return TrainingMode::semi_supervised;
  throw ContractError("unknown training mode '" + s + "' (expected unsupervised, supervised or semi_supervised)");
}

std::string to_string(TrainingMode m) {
  switch (m) {
    case TrainingMode::unsupervised: return "unsupervised";
    case TrainingMode::supervised: return "supervised";
    case TrainingMode::semi_supervised: return "semi_supervised";
  }
  return "?";
}

SupervisedTarget parse_supervised_target(const std::string& s) {
  if (s == "weights") return SupervisedTarget::weights;
  if (s == "posterior") return SupervisedTarget::posterior;
  throw ContractError("unknown supervised target '" + s + "' (expected weights or posterior)");
}

std::string to_string(SupervisedTarget t) {
  return t == SupervisedTarget::weights ? "weights" : "posterior";
}

Tensor reconstruction_term(const Tensor& o, const DecoderStats& dec) {
  const std::size_t n = o.rows();
  const std::size_t l = o.cols();
  const std::size_t t = dec.samples;
  if (t == 0) throw ContractError("reconstruction_term: T must be >= 1");
  if (dec.mu_o.rows() != t * n || dec.mu_o.cols() != l || dec.log_std_o.rows() != t * n ||
      dec.log_std_o.cols() != l) {
    throw ContractError("reconstruction_term: decoder output does not match T x N x L");
  }
  const Tensor z = mul(sub(tile_rows(o, t), dec.mu_o), exp(neg(dec.log_std_o)));
  // per (t, n): -L/2 ln 2pi - sum log_std - 1/2 sum z^2
  const Tensor per_sample =
      add_scalar(neg(sum_rows(add(dec.log_std_o, scale(square(z), 0.5)))),
                 -0.5 * static_cast<double>(l) * special::kLn2Pi);
  const Tensor grid = reshape(per_sample, {t, n});
  return scale(transpose(sum_cols(grid)), 1.0 / static_cast<double>(t));
}

Tensor encoder_entropy(const EncoderStats& enc) {
  const double d = static_cast<double>(enc.log_std_x.cols());
  return add_scalar(sum_rows(enc.log_std_x), 0.5 * d * (special::kLn2Pi + 1.0));
}

Tensor label_weights(const std::vector<int>& labels, std::size_t components, const Tensor* fallback) {
  std::vector<double> w(labels.size() * components, 0.0);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const int y = labels[n];
    if (y == kUnlabeled) {
      if (!fallback) throw ContractError("supervised loss: row " + std::to_string(n) + " has no label");
      for (std::size_t k = 0; k < components; ++k) w[n * components + k] = fallback->at(n, k);
      continue;
    }
    if (y < 0 || static_cast<std::size_t>(y) >= components) {
      throw ContractError("label " + std::to_string(y) + " at row " + std::to_string(n) +
                          " is outside [0, " + std::to_string(components) + ")");
    }
    w[n * components + static_cast<std::size_t>(y)] = 1.0;
  }
  return Tensor::constant({labels.size(), components}, std::move(w));
}

ElboTerms elbo_terms(const Tensor& o, const EncoderStats& enc, const DecoderStats& dec,
                     const Tensor& log_rho, const Tensor& weights) {
  if (weights.rows() != log_rho.rows() || weights.cols() != log_rho.cols()) {
    throw ContractError("elbo_terms: weights must match ln rho (" + shape_str(log_rho.shape()) + ")");
  }
  return elbo_terms(o, enc, dec, sum_rows(mul(weights, log_rho)));
}

ElboTerms elbo_terms(const Tensor& o, const EncoderStats& enc, const DecoderStats& dec,
                     const Tensor& cross_entropy) {
  ElboTerms t;
  t.recon = reconstruction_term(o, dec);
  t.enc_entropy = encoder_entropy(enc);
  if (cross_entropy.rows() != o.rows() || cross_entropy.cols() != 1) {
    throw ContractError("elbo_terms: cross-entropy term must be N x 1");
  }
  t.cross_entropy = cross_entropy;
  t.total = add(add(t.recon, t.enc_entropy), t.cross_entropy);
  return t;
}

std::vector<ElboBreakdown> breakdown(const ElboTerms& terms) {
  const std::size_t n = terms.total.rows();
  std::vector<ElboBreakdown> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].recon = terms.recon.data()[i];
    out[i].enc_entropy = terms.enc_entropy.data()[i];
    out[i].cross_entropy = terms.cross_entropy.data()[i];
    out[i].total = terms.total.data()[i];
  }
  return out;
}

Tensor l1_penalty(const LeafMap& leaves) {
  Tensor total = Tensor::scalar(0.0);
  for (const auto& [name, t] : leaves) {
    if (name.rfind("enc.", 0) == 0 || name.rfind("dec.", 0) == 0) total = add(total, sum(abs(t)));
  }
  return total;
}

LossOutput loss_batch(const Tensor& o, const LeafMap& leaves, const ModelDims& dims,
                      const LossOptions& opts, const Tensor& eps, const std::vector<int>* labels,
                      const Tensor* fixed_weights) {
  const std::size_t n = o.rows();
  if (n == 0) throw ContractError("loss_batch: empty batch");
  if (o.cols() != dims.observed_dim) {
    throw ContractError("loss_batch: batch has " + std::to_string(o.cols()) + " features, model expects " +
                        std::to_string(dims.observed_dim));
  }
  if (labels && labels->size() != n) throw ContractError("loss_batch: one label per row required");

  LossOutput out;
  out.encoder = encoder_forward(o, leaves, dims.encoder, opts.log_std_clamp);
  const SmmGraph g = materialize(leaves, dims.components, dims.latent_dim, opts.sigma_jitter_sq);
  out.posterior = posterior(out.encoder, g, opts.detach_gamma);
  const Tensor x = reparameterize(out.encoder, eps);
  const DecoderStats dec = decoder_forward(x, eps.shape().at(0), leaves, dims.decoder, opts.log_std_clamp);

  Tensor cross;
  if (fixed_weights) {
    cross = sum_rows(mul(*fixed_weights, out.posterior.log_rho));
  } else if (opts.mode == TrainingMode::unsupervised) {
    cross = sum_rows(mul(out.posterior.gamma, out.posterior.log_rho));
  } else {
    if (!labels) throw ContractError("loss_batch: supervised mode requires labels");
    const bool semi = opts.mode == TrainingMode::semi_supervised;
    // Labelled rows use one-hot weights; unlabelled rows keep gamma ln rho.
    std::vector<int> known(*labels);
    std::vector<double> unl_mask(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (known[i] == kUnlabeled) {
        if (!semi) throw ContractError("supervised loss: row " + std::to_string(i) + " has no label");
        unl_mask[i] = 1.0;
        known[i] = 0;
      }
    }
    const Tensor mask = Tensor::constant({n, 1}, unl_mask);
    const Tensor onehot = mul(label_weights(known, dims.components), add_scalar(neg(mask), 1.0));
    const Tensor scores = opts.target == SupervisedTarget::weights
                              ? out.posterior.log_rho
                              : sub(out.posterior.log_qz, logsumexp_rows(out.posterior.log_qz));
    cross = sum_rows(mul(onehot, scores));
    if (semi) cross = add(cross, mul(mask, sum_rows(mul(out.posterior.gamma, out.posterior.log_rho))));
  }
  out.terms = elbo_terms(o, out.encoder, dec, cross);
  Tensor loss = neg(mean(out.terms.total));
  if (opts.l1_coeff != 0.0) loss = add(loss, scale(l1_penalty(leaves), opts.l1_coeff));
  if (opts.constant != 0.0) loss = add_scalar(loss, opts.constant);
  out.loss = loss;
  return out;
}

Tensor pretrain_loss_batch(const Tensor& o, const LeafMap& leaves, const ModelDims& dims,
                           double log_std_clamp, double std, const Tensor& eps) {
  if (o.rows() == 0) throw ContractError("pretrain_loss_batch: empty batch");
  if (!(std > 0.0)) throw ContractError("pretrain_loss_batch: std must be positive");
  const EncoderStats enc = encoder_forward(o, leaves, dims.encoder, log_std_clamp);
  const EncoderStats fixed{enc.mu_x, Tensor::constant(enc.mu_x.shape(), std::vector<double>(enc.mu_x.numel(), std::log(std)))};
  const DecoderStats dec = decoder_forward(reparameterize(fixed, eps), eps.shape().at(0), leaves, dims.decoder,
                                           log_std_clamp);
  const Tensor shrink = scale(sum_rows(square(enc.mu_x)), 0.5);
  return neg(mean(sub(reconstruction_term(o, dec), shrink)));
}

}  // namespace tvae
