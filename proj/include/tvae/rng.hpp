#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

namespace tvae {

/// Seeded random stream. Uniforms are built from raw 64-bit engine output and
/// normals from Box-Muller, so streams are identical across standard libraries.
/// Not thread-safe: use one instance per worker.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on (0, 1].
  double uniform_pos();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();

  /// Engine and cached normal as text; restore() yields an identical stream.
  std::string state() const;
  void restore(const std::string& state);

  /// Independent child stream, deterministic in (this stream, tag).
  Rng split(std::uint64_t tag);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace tvae
