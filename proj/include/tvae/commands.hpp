#pragma once

// Command implementations behind the `tvae` executable.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tvae/training.hpp"

namespace tvae {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNumeric = 2;

/// Parses argv and runs the chosen subcommand; never throws.
int run_cli(int argc, const char* const* argv);

/// Root for run directories: $TVAE_OUTPUT_ROOT, else "runs".
std::filesystem::path output_root();

struct TrainCommand {
  std::filesystem::path config;
  std::filesystem::path data;
  std::optional<std::filesystem::path> out;
  std::uint64_t seed = 0;
  std::optional<Baseline> baseline;
  std::optional<std::size_t> epochs;
  std::size_t plot_samples = 1000;
};

/// Writes manifest.json, config.json, checkpoint.json, metrics.csv,
/// timing.csv, latent.csv and samples.csv. Returns the run directory.
std::filesystem::path cmd_train(const TrainCommand& cmd);

struct SampleCommand {
  std::filesystem::path checkpoint;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

/// CSV columns: cluster, u, x0..x{D-1}, o0..o{L-1}.
void cmd_sample(const SampleCommand& cmd);

struct GradcheckOptions {
  std::size_t observed_dim = 4;
  std::size_t hidden = 8;
  std::size_t latent_dim = 2;
  std::size_t components = 3;
  std::size_t rows = 6;
  std::size_t samples = 1;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double l1_coeff = 0.01;
  TrainingMode mode = TrainingMode::unsupervised;
  /// Test hook: perturb the analytic gradient of this group.
  std::optional<std::string> corrupt_group;
};

struct GradcheckResult {
  /// Max relative error per group: encoder, decoder, m, n, mu, C.
  std::map<std::string, double> max_rel_error;
  std::size_t entries = 0;
  double worst() const;
};

/// Central differences against reverse-mode gradients of the full loss with
/// frozen noise. Relative error is |a - f| / max(|a|, |f|, 1e-6).
GradcheckResult run_gradcheck(const GradcheckOptions& opts);

inline const std::vector<std::string> kGradGroups = {"encoder", "decoder", "m", "n", "mu", "C"};

struct GridCommand {
  std::filesystem::path template_config;
  std::filesystem::path grid;
  std::filesystem::path data;
  std::filesystem::path out;
  std::size_t folds = 5;
  double label_fraction = 1.0;
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
};

struct GridCell {
  std::size_t index = 0;
  std::string overrides;  // compact JSON of the grid values
  double dev_error = 0.0;
  double test_mean = 0.0;
  double test_std = 0.0;
};

/// Cells sorted by mean dev error (ties by index). Completed runs found on
/// disk are reused.
std::vector<GridCell> cmd_gridsearch(const GridCommand& cmd);

}  // namespace tvae
