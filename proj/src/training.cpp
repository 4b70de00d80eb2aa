#include "tvae/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "tvae/distributions.hpp"
#include "tvae/errors.hpp"

namespace tvae {

Baseline parse_baseline(const std::string& s) {
  if (s == "student") return Baseline::student;
  if (s == "gaussian") return Baseline::gaussian;
  throw ContractError("unknown baseline '" + s + "' (expected student or gaussian)");
}

std::string to_string(Baseline b) { return b == Baseline::student ? "student" : "gaussian"; }

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ContractError(std::string("config: ") + name + " must be positive");
  };
  positive(stepsize, "stepsize");
  positive(sigma_jitter_sq, "sigma_jitter_sq");
  positive(static_cast<double>(latent_dim), "latent_dim");
  positive(static_cast<double>(batch_size), "batch_size");
  positive(static_cast<double>(samples), "samples");
  positive(log_std_clamp, "log_std_clamp");
  positive(pretrain_std, "pretrain_std");
  positive(clip_norm, "clip_norm");
  if (!(l1_coeff >= 0.0)) throw ContractError("config: l1_coeff must be >= 0");
  if (!(initial_dof > kDofFloor)) throw ContractError("config: initial_dof must exceed 2 + 1e-3");
  for (auto h : encoder_hidden)
    if (h == 0) throw ContractError("config: encoder_hidden widths must be positive");
  for (auto h : decoder_hidden)
    if (h == 0) throw ContractError("config: decoder_hidden widths must be positive");
  if (mode != TrainingMode::semi_supervised && supervised_epochs != 0) {
    throw ContractError("config: supervised_epochs applies to semi_supervised mode only");
  }
}

void adam_step(ParamSet& params, const GradientMap& grads, AdamState& state, const AdamOptions& opts) {
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(opts.beta1, t);
  const double c2 = 1.0 - std::pow(opts.beta2, t);
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("adam_step: gradient for unknown parameter '" + name + "'");
    auto& p = it->second.values;
    if (g.numel() != p.size()) throw ContractError("adam_step: gradient shape mismatch for '" + name + "'");
    auto& m = state.m[name];
    auto& v = state.v[name];
    m.resize(p.size(), 0.0);
    v.resize(p.size(), 0.0);
    const auto gd = g.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * gd[i];
      v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * gd[i] * gd[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= opts.lr * mhat / (std::sqrt(vhat) + opts.eps);
    }
  }
}

double clip_grad_norm(GradientMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, g] : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& [_, g] : grads) {
      std::vector<double> v = g.to_vector();
      for (auto& x : v) x *= f;
      g = Tensor::constant(g.shape(), std::move(v));
    }
  }
  return norm;
}

ModelDims Checkpoint::dims() const {
  ModelDims d;
  d.components = components;
  d.latent_dim = config.latent_dim;
  d.observed_dim = observed_dim;
  d.encoder.activation = config.activation;
  d.decoder.activation = config.activation;
  d.encoder.layer_dims.push_back(observed_dim);
  d.encoder.layer_dims.insert(d.encoder.layer_dims.end(), config.encoder_hidden.begin(), config.encoder_hidden.end());
  d.encoder.layer_dims.push_back(config.latent_dim);
  d.decoder.layer_dims.push_back(config.latent_dim);
  d.decoder.layer_dims.insert(d.decoder.layer_dims.end(), config.decoder_hidden.begin(), config.decoder_hidden.end());
  d.decoder.layer_dims.push_back(observed_dim);
  return d;
}

std::set<std::string> Checkpoint::frozen() const {
  if (config.baseline == Baseline::gaussian) return {kMixDof};
  return {};
}

SmmRawParams Checkpoint::mixture() const { return SmmRawParams::load(params, config.sigma_jitter_sq); }

namespace {

constexpr std::size_t kEvalChunk = 2048;

std::set<std::string> all_names(const ParamSet& params) {
  std::set<std::string> s;
  for (const auto& [name, _] : params) s.insert(name);
  return s;
}

Tensor rows_tensor(const Dataset& data, const std::vector<std::size_t>& idx) {
  std::vector<double> v;
  v.reserve(idx.size() * data.cols);
  for (std::size_t i : idx) {
    const auto* p = data.observations.data() + i * data.cols;
    v.insert(v.end(), p, p + data.cols);
  }
  return Tensor::constant({idx.size(), data.cols}, std::move(v));
}

std::vector<std::size_t> iota(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

// Encoder means of every row with all parameters held constant.
std::vector<double> encoder_means(const ParamSet& params, const ModelDims& dims, const Dataset& data,
                                  double clamp) {
  const LeafMap leaves = make_leaves(params, all_names(params));
  std::vector<double> out;
  out.reserve(data.rows * dims.latent_dim);
  for (std::size_t b = 0; b < data.rows; b += kEvalChunk) {
    const auto idx = iota(b, std::min(data.rows, b + kEvalChunk));
    const auto enc = encoder_forward(rows_tensor(data, idx), leaves, dims.encoder, clamp);
    out.insert(out.end(), enc.mu_x.data().begin(), enc.mu_x.data().end());
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

Trainer::Trainer(const Dataset& data, const TrainConfig& cfg) : data_(data), rng_(cfg.seed) {
  cfg.validate();
  state_.config = cfg;
  state_.observed_dim = data.cols;
  std::size_t k = cfg.components ? cfg.components : data.num_classes();
  if (k == 0) throw ContractError("train: components is 0 and the data carries no labels");
  state_.components = k;
  check_data();

  const ModelDims dims = state_.dims();
  Rng init_rng = rng_.split(1);
  init_mlp(state_.params, "enc", dims.encoder, init_rng);
  init_mlp(state_.params, "dec", dims.decoder, init_rng);
  if (cfg.pretrain_epochs > 0) {
    Rng pre_rng = rng_.split(3);
    pretrain(pre_rng);
  }

  GmmOptions gopts;
  gopts.max_iters = cfg.gmm_iters;
  gopts.initial_dof = cfg.baseline == Baseline::gaussian ? kGaussianDof : cfg.initial_dof;
  const auto mu = encoder_means(state_.params, dims, data, cfg.log_std_clamp);
  const std::size_t d = cfg.latent_dim;
  GmmFit fit;
  if (cfg.mode == TrainingMode::unsupervised) {
    Rng gmm_rng = rng_.split(2);
    fit = gmm_em_fit(mu, data.rows, d, k, gmm_rng, cfg.sigma_jitter_sq, gopts);
    state_.warm_labels.resize(data.rows);
    for (std::size_t n = 0; n < data.rows; ++n) {
      const double* r = fit.resp.data() + n * k;
      state_.warm_labels[n] = static_cast<int>(std::max_element(r, r + k) - r);
    }
  } else {
    std::vector<double> lab_mu;
    std::vector<int> lab;
    for (std::size_t n = 0; n < data.rows; ++n) {
      if (data.labels[n] == kUnlabeled) continue;
      lab_mu.insert(lab_mu.end(), mu.begin() + static_cast<std::ptrdiff_t>(n * d),
                    mu.begin() + static_cast<std::ptrdiff_t>((n + 1) * d));
      lab.push_back(data.labels[n]);
    }
    fit = gmm_fit_from_labels(lab_mu, lab.size(), d, k, lab, cfg.sigma_jitter_sq, gopts);
    state_.warm_labels = data.labels;
  }
  fit.raw.store(state_.params);
  state_.rng_state = rng_.state();
}

Trainer::Trainer(const Dataset& data, Checkpoint state) : data_(data), state_(std::move(state)) {
  if (state_.version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(state_.version) + " is not supported");
  }
  state_.config.validate();
  if (data.cols != state_.observed_dim) throw ContractError("resume: data width differs from the checkpoint");
  if (state_.warm_labels.size() != data.rows) throw ContractError("resume: data row count differs from the checkpoint");
  check_data();
  rng_.restore(state_.rng_state);
}

void Trainer::pretrain(Rng& rng) {
  const TrainConfig& cfg = state_.config;
  const ModelDims dims = state_.dims();
  AdamState adam;
  std::vector<std::size_t> order = iota(0, data_.rows);
  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + cfg.batch_size)));
      const Tensor eps = sample_standard_normal(rng, {cfg.samples, idx.size(), cfg.latent_dim});
      const LeafMap leaves = make_leaves(state_.params);
      GradResult g;
      try {
        g = evaluate_and_grad(
            pretrain_loss_batch(rows_tensor(data_, idx), leaves, dims, cfg.log_std_clamp, cfg.pretrain_std, eps));
      } catch (const NumericFault& e) {
        throw NumericFault("pretrain epoch " + std::to_string(epoch + 1) + ": " + e.what());
      } catch (const DomainError& e) {
        throw NumericFault("pretrain epoch " + std::to_string(epoch + 1) + ": " + e.what());
      }
      clip_grad_norm(g.grads, cfg.clip_norm);
      adam_step(state_.params, g.grads, adam, AdamOptions{cfg.stepsize});
    }
  }
  auto& bls = state_.params.at("enc.bls").values;
  std::fill(bls.begin(), bls.end(), std::log(cfg.pretrain_std));
}

void Trainer::check_data() const {
  data_.validate();
  if (data_.rows == 0) throw ContractError("train: dataset is empty");
  const auto mode = state_.config.mode;
  if (mode == TrainingMode::unsupervised) return;
  if (!data_.has_labels()) throw ContractError("train: " + to_string(mode) + " mode needs labels");
  std::size_t labelled = 0;
  for (std::size_t n = 0; n < data_.rows; ++n) {
    const int y = data_.labels[n];
    if (y == kUnlabeled) {
      if (mode == TrainingMode::supervised) {
        throw ContractError("train: supervised mode needs a label on every row (row " + std::to_string(n) + ")");
      }
      continue;
    }
    if (static_cast<std::size_t>(y) >= state_.components) {
      throw ContractError("train: label " + std::to_string(y) + " exceeds the component count");
    }
    ++labelled;
  }
  if (labelled < state_.components) throw ContractError("train: fewer labelled rows than components");
}

std::optional<EpochMetrics> Trainer::step() {
  if (finished()) return std::nullopt;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainConfig& cfg = state_.config;
  const std::size_t n_rows = data_.rows;
  if (state_.cursor == 0 && state_.order.empty()) {
    state_.order = iota(0, n_rows);
    for (std::size_t i = n_rows; i > 1; --i) std::swap(state_.order[i - 1], state_.order[rng_.below(i)]);
    state_.epoch_loss_sum = 0.0;
    state_.epoch_predictions.assign(n_rows, -1);
  }
  const std::size_t end = std::min(n_rows, state_.cursor + cfg.batch_size);
  const std::vector<std::size_t> idx(state_.order.begin() + static_cast<std::ptrdiff_t>(state_.cursor),
                                     state_.order.begin() + static_cast<std::ptrdiff_t>(end));
  const std::size_t b = idx.size();

  LossOptions opts;
  opts.l1_coeff = cfg.l1_coeff;
  opts.sigma_jitter_sq = cfg.sigma_jitter_sq;
  opts.log_std_clamp = cfg.log_std_clamp;
  opts.detach_gamma = cfg.detach_gamma;
  opts.target = cfg.supervised_target;
  opts.mode = cfg.mode;
  if (cfg.mode == TrainingMode::semi_supervised) {
    opts.mode = state_.epoch < cfg.supervised_epochs ? TrainingMode::semi_supervised : TrainingMode::unsupervised;
  }
  std::vector<int> labels;
  if (state_.step < cfg.warm_start_iters) {
    opts.mode = TrainingMode::semi_supervised;
    opts.target = SupervisedTarget::weights;
    for (std::size_t i : idx) labels.push_back(state_.warm_labels[i]);
  } else if (opts.mode != TrainingMode::unsupervised) {
    for (std::size_t i : idx) labels.push_back(data_.labels[i]);
  }

  const Tensor eps = sample_standard_normal(rng_, {cfg.samples, b, cfg.latent_dim});
  const LeafMap leaves = make_leaves(state_.params, state_.frozen());
  const std::size_t batch_no = state_.cursor / cfg.batch_size;
  GradResult g;
  LossOutput out;
  try {
    out = loss_batch(rows_tensor(data_, idx), leaves, state_.dims(), opts, eps, labels.empty() ? nullptr : &labels);
    g = evaluate_and_grad(out.loss);
  } catch (const NumericFault& e) {
    throw NumericFault("epoch " + std::to_string(state_.epoch + 1) + ", batch " + std::to_string(batch_no) + ": " +
                       e.what());
  } catch (const DomainError& e) {
    throw NumericFault("epoch " + std::to_string(state_.epoch + 1) + ", batch " + std::to_string(batch_no) + ": " +
                       e.what());
  }
  if (!std::isfinite(g.value)) {
    throw NumericFault("epoch " + std::to_string(state_.epoch + 1) + ", batch " + std::to_string(batch_no) +
                       ": non-finite loss");
  }
  clip_grad_norm(g.grads, cfg.clip_norm);
  adam_step(state_.params, g.grads, state_.adam, AdamOptions{cfg.stepsize});
  ++state_.step;

  state_.epoch_loss_sum += g.value * static_cast<double>(b);
  const auto pred = argmax_rows(out.posterior.gamma);
  for (std::size_t i = 0; i < b; ++i) state_.epoch_predictions[idx[i]] = pred[i];
  state_.cursor = end;
  state_.rng_state = rng_.state();
  epoch_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (state_.cursor >= n_rows) return close_epoch();
  return std::nullopt;
}

EpochMetrics Trainer::close_epoch() {
  EpochMetrics m;
  m.epoch = state_.epoch + 1;
  m.loss = state_.epoch_loss_sum / static_cast<double>(data_.rows);
  m.error_rate = std::numeric_limits<double>::quiet_NaN();
  if (data_.has_labels()) {
    const bool match = state_.config.mode == TrainingMode::unsupervised;
    m.error_rate = score_predictions(state_.epoch_predictions, data_.labels, state_.components, match).error_rate;
  }
  const auto nu = learned_dof(state_);
  for (std::size_t k = 0; k < nu.size(); ++k) {
    if (!(nu[k] > 2.0)) throw NumericFault("dof of component " + std::to_string(k) + " fell to " + std::to_string(nu[k]));
  }
  m.median_nu = median(nu);
  m.seconds = epoch_seconds_;
  epoch_seconds_ = 0.0;
  ++state_.epoch;
  state_.cursor = 0;
  state_.order.clear();
  state_.epoch_predictions.clear();
  state_.epoch_loss_sum = 0.0;
  return m;
}

EpochMetrics Trainer::run_epoch() {
  if (finished()) throw ContractError("run_epoch: all configured epochs are done");
  while (true) {
    if (auto m = step()) return *m;
  }
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  Trainer trainer(data, cfg);
  TrainResult result;
  while (!trainer.finished()) {
    auto m = trainer.run_epoch();
    result.metrics.push_back(m);
    if (on_epoch) on_epoch(m, trainer.state());
  }
  result.checkpoint = trainer.state();
  return result;
}

std::vector<double> learned_dof(const Checkpoint& ckpt) {
  auto it = ckpt.params.find(kMixDof);
  if (it == ckpt.params.end()) throw ContractError("checkpoint has no dof parameters");
  std::vector<double> nu;
  for (double n : it->second.values) nu.push_back(dof_from_preactivation(n));
  return nu;
}

std::vector<double> predict_responsibilities(const Checkpoint& ckpt, const Dataset& data) {
  if (data.cols != ckpt.observed_dim) {
    throw ContractError("evaluate: data has " + std::to_string(data.cols) + " features, model expects " +
                        std::to_string(ckpt.observed_dim));
  }
  const ModelDims dims = ckpt.dims();
  const LeafMap leaves = make_leaves(ckpt.params, all_names(ckpt.params));
  const SmmGraph g = materialize(leaves, dims.components, dims.latent_dim, ckpt.config.sigma_jitter_sq);
  std::vector<double> out;
  out.reserve(data.rows * dims.components);
  for (std::size_t b = 0; b < data.rows; b += kEvalChunk) {
    const auto idx = iota(b, std::min(data.rows, b + kEvalChunk));
    const auto enc = encoder_forward(rows_tensor(data, idx), leaves, dims.encoder, ckpt.config.log_std_clamp);
    const auto post = posterior(enc, g);
    out.insert(out.end(), post.gamma.data().begin(), post.gamma.data().end());
  }
  return out;
}

EvalResult score_predictions(const std::vector<int>& predicted, const std::vector<int>& labels,
                             std::size_t components, bool match) {
  std::size_t classes = 0;
  for (int y : labels) classes = std::max(classes, static_cast<std::size_t>(y + 1));
  EvalResult r;
  r.predictions = predicted;
  r.matched = match;
  if (!match && classes > components) {
    throw ContractError("evaluate: labels name " + std::to_string(classes) + " classes but the model has " +
                        std::to_string(components) + " components");
  }
  const std::size_t width = std::max(classes, components);
  auto conf = confusion_matrix(predicted, labels, components, width);
  double total = 0.0;
  double correct = 0.0;
  if (match) {
    const Matching m = match_clusters_to_classes(conf);
    std::vector<std::vector<double>> relabelled(width, std::vector<double>(width, 0.0));
    for (std::size_t c = 0; c < components; ++c)
      for (std::size_t y = 0; y < width; ++y) relabelled[m.perm[c]][y] += conf[c][y];
    for (auto& p : r.predictions)
      if (p >= 0) p = static_cast<int>(m.perm[static_cast<std::size_t>(p)]);
    conf = std::move(relabelled);
  }
  for (std::size_t c = 0; c < conf.size(); ++c)
    for (std::size_t y = 0; y < conf[c].size(); ++y) {
      total += conf[c][y];
      if (c == y) correct += conf[c][y];
    }
  r.confusion = std::move(conf);
  r.error_rate = total > 0.0 ? 1.0 - correct / total : 0.0;
  return r;
}

EvalResult evaluate(const Checkpoint& ckpt, const Dataset& data) {
  if (!data.has_labels()) throw ContractError("evaluate: the data has no label column");
  const auto gamma = predict_responsibilities(ckpt, data);
  const Tensor g = Tensor::constant({data.rows, ckpt.components}, gamma);
  const auto pred = argmax_rows(g);
  return score_predictions(pred, data.labels, ckpt.components, ckpt.config.mode == TrainingMode::unsupervised);
}

}  // namespace tvae
