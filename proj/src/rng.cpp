#include "tvae/rng.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "tvae/errors.hpp"

namespace tvae {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform_pos() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ContractError("Rng::below: n must be positive");
  // rejection keeps the draw unbiased
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v;
  do {
    v = engine_();
  } while (v >= limit);
  return v % n;
}

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = uniform_pos();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  spare_ = r * std::sin(theta);
  return r * std::cos(theta);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_ << ' ';
  if (spare_) {
    os << "1 " << std::hexfloat << *spare_;
  } else {
    os << "0";
  }
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  int has_spare = 0;
  is >> has_spare;
  if (!is) throw FormatError("Rng::restore: malformed state");
  if (has_spare) {
    std::string tok;
    is >> tok;
    spare_ = std::strtod(tok.c_str(), nullptr);
  } else {
    spare_.reset();
  }
}

Rng Rng::split(std::uint64_t tag) {
  const std::uint64_t base = engine_();
  // splitmix64 finalizer decorrelates nearby tags
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return Rng(z ^ (z >> 31));
}

}  // namespace tvae
