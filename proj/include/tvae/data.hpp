#pragma once

// Datasets, synthetic generators, CSV files, cross-validation splits and
// cluster-to-class matching.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "tvae/rng.hpp"

namespace tvae {

/// N x L observations with optional labels. An empty label vector means the
/// dataset is unlabeled; kUnlabeled (-1) marks single unlabeled rows.
struct Dataset {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> observations;
  std::vector<int> labels;

  bool has_labels() const { return !labels.empty(); }
  /// 1 + largest label, 0 if unlabeled.
  std::size_t num_classes() const;
  void validate() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

struct PinwheelOptions {
  std::size_t arms = 5;
  std::size_t points_per_arm = 400;
  double radial_std = 0.3;
  double tangential_std = 0.05;
  double rate = 0.25;
};

/// Gaussian blobs at (1, 0) with the given radial and tangential spread,
/// rotated to equally spaced angles and warped by rate * exp(radius).
Dataset gen_pinwheel(Rng& rng, const PinwheelOptions& opts = {});

struct SurrogateOptions {
  std::size_t classes = 30;
  std::size_t observed_dim = 200;
  std::size_t latent_dim = 10;
  std::size_t min_per_class = 503;
  std::size_t max_per_class = 1000;
  /// Per-class dof drawn uniformly from [nu_min, nu_max]. Set both equal
  /// to fix it (1e6 gives Gaussian classes).
  double nu_min = 3.0;
  double nu_max = 10.0;
  /// Standard deviation of the class means.
  double separation = 2.0;
  /// Weight of the tanh part of the observation map.
  double nonlinearity = 0.5;
  double noise_std = 0.05;
};

/// Student-t mixture in a latent space, pushed through
/// o = A x + c tanh(B x) + noise with fixed random A, B.
Dataset gen_surrogate_attribution(Rng& rng, const SurrogateOptions& opts = {});

/// Header "f0,...,f{L-1}[,label]"; an empty label cell reads as kUnlabeled.
Dataset load_csv(const std::filesystem::path& path);
void save_csv(const Dataset& data, const std::filesystem::path& path);

struct SplitPlan {
  /// folds[f] lists the non-holdout rows in fold f.
  std::vector<std::vector<std::size_t>> folds;
  std::vector<std::size_t> dev;
  std::vector<std::size_t> test;
  double label_fraction = 1.0;
  /// Rows whose label is hidden from training.
  std::vector<std::size_t> dropped_labels;

  /// Union of every fold except `holdout_fold` (all folds if out of range).
  std::vector<std::size_t> train_indices(std::size_t holdout_fold) const;
  void validate(std::size_t rows) const;
};

/// Stratified when labels exist: 20% holdout split evenly into dev and test,
/// the rest dealt round-robin into folds. label_fraction keeps that share of
/// labels in each class of the training rows.
SplitPlan kfold_split(const Dataset& data, std::size_t folds, double label_fraction, Rng& rng);

/// Copy of the subset with the dropped labels set to kUnlabeled.
Dataset apply_label_drop(const Dataset& data, const SplitPlan& plan,
                         const std::vector<std::size_t>& indices);

struct Matching {
  /// cluster c is mapped to class perm[c]
  std::vector<std::size_t> perm;
  std::size_t matched = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

/// confusion[c][y]: rows assigned to cluster c with true class y. Hungarian
/// algorithm; rectangular matrices are padded with zeros.
Matching match_clusters_to_classes(const std::vector<std::vector<double>>& confusion);

/// Counts of (predicted, label) pairs; rows with kUnlabeled are skipped.
std::vector<std::vector<double>> confusion_matrix(const std::vector<int>& predicted,
                                                  const std::vector<int>& labels, std::size_t clusters,
                                                  std::size_t classes);

}  // namespace tvae
