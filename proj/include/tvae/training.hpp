#pragma once

// Optimization loop: GMM warm start, label-fixed warm-up steps, Adam with
// global-norm clipping, checkpoints and evaluation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tvae/data.hpp"
#include "tvae/elbo.hpp"
#include "tvae/mixture.hpp"
#include "tvae/network.hpp"
#include "tvae/params.hpp"
#include "tvae/rng.hpp"

namespace tvae {

enum class Baseline { student, gaussian };

Baseline parse_baseline(const std::string& s);
std::string to_string(Baseline b);

struct TrainConfig {
  double stepsize = 0.001;
  double sigma_jitter_sq = 0.1;
  std::size_t latent_dim = 2;
  double l1_coeff = 0.0;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  std::size_t samples = 1;
  std::size_t warm_start_iters = 15;
  std::uint64_t seed = 0;
  TrainingMode mode = TrainingMode::unsupervised;
  SupervisedTarget supervised_target = SupervisedTarget::weights;
  /// Semi-supervised only: number of leading epochs trained on labels.
  std::size_t supervised_epochs = 0;
  bool detach_gamma = false;
  Baseline baseline = Baseline::student;
  /// Mixture size; 0 takes the number of classes in the labels.
  std::size_t components = 0;
  std::vector<std::size_t> encoder_hidden = {512, 512};
  std::vector<std::size_t> decoder_hidden = {512, 512};
  Activation activation = Activation::relu;
  double log_std_clamp = kLogStdClamp;
  double clip_norm = 1.0;
  double initial_dof = 5.0;
  std::size_t gmm_iters = 50;
  /// Epochs of fixed-std autoencoder training before the GMM warm start.
  std::size_t pretrain_epochs = 0;
  /// Fixed posterior std used while pretraining; also the initial encoder std.
  double pretrain_std = 0.1;

  void validate() const;
};

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update of every block that has a gradient.
void adam_step(ParamSet& params, const GradientMap& grads, AdamState& state, const AdamOptions& opts);

/// Rescales all gradients so the global l2 norm is at most max_norm. Returns
/// the norm before clipping.
double clip_grad_norm(GradientMap& grads, double max_norm = 1.0);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  /// NaN when the training data carries no labels.
  double error_rate = 0.0;
  double median_nu = 0.0;
  double seconds = 0.0;
};

inline constexpr int kCheckpointVersion = 1;

/// Complete training state; resuming from it continues bit-identically.
struct Checkpoint {
  int version = kCheckpointVersion;
  TrainConfig config;
  std::size_t observed_dim = 0;
  std::size_t components = 0;
  ParamSet params;
  AdamState adam;
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  std::string rng_state;
  /// Cross-entropy weights of the warm-up steps, one per training row.
  std::vector<int> warm_labels;
  /// Position inside the current epoch.
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  double epoch_loss_sum = 0.0;
  std::vector<int> epoch_predictions;

  ModelDims dims() const;
  std::set<std::string> frozen() const;
  SmmRawParams mixture() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

class Trainer {
 public:
  /// Fresh run: initializes networks, fits the GMM warm start.
  Trainer(const Dataset& data, const TrainConfig& cfg);
  /// Resumes from a checkpoint over the same training data.
  Trainer(const Dataset& data, Checkpoint state);

  /// One parameter update. Returns the epoch summary when it completes an epoch.
  std::optional<EpochMetrics> step();
  EpochMetrics run_epoch();
  bool finished() const { return state_.epoch >= state_.config.epochs; }

  const Checkpoint& state() const { return state_; }

 private:
  void check_data() const;
  void pretrain(Rng& rng);
  EpochMetrics close_epoch();

  const Dataset& data_;
  Checkpoint state_;
  Rng rng_;
  double epoch_seconds_ = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;
};

using EpochCallback = std::function<void(const EpochMetrics&, const Checkpoint&)>;

/// Runs the remaining epochs of a fresh trainer.
TrainResult train(const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct EvalResult {
  double error_rate = 0.0;
  /// confusion[c][y]: predicted component c, true class y (after matching
  /// for unsupervised models the rows are relabelled to classes).
  std::vector<std::vector<double>> confusion;
  std::vector<int> predictions;
  bool matched = false;
};

/// Responsibilities of every row (N x K) under the current parameters.
std::vector<double> predict_responsibilities(const Checkpoint& ckpt, const Dataset& data);

/// Error rate of argmax responsibilities against labels. Unsupervised models
/// are scored after optimal cluster-to-class matching.
EvalResult evaluate(const Checkpoint& ckpt, const Dataset& data);

/// Scores predictions; `match` applies the Hungarian assignment first.
EvalResult score_predictions(const std::vector<int>& predicted, const std::vector<int>& labels,
                             std::size_t components, bool match);

/// Learned dof of every component.
std::vector<double> learned_dof(const Checkpoint& ckpt);

}  // namespace tvae
