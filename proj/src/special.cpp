#include "tvae/special.hpp"

#include <array>
#include <cmath>
#include <string>

#include "tvae/errors.hpp"

namespace tvae::special {
namespace {

constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

void require_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(name) + ": argument must be finite and > 0, got " +
                      std::to_string(x));
  }
}

double lanczos(double x) {
  if (x < 0.5) {
    // reflection, valid on (0, 0.5)
    return std::log(kPi / std::sin(kPi * x)) - lanczos(1.0 - x);
  }
  x -= 1.0;
  double a = kLanczos[0];
  const double t = x + 7.5;
  for (int i = 1; i < 9; ++i) a += kLanczos[i] / (x + i);
  return 0.5 * kLn2Pi + (x + 0.5) * std::log(t) - t + std::log(a);
}

}  // namespace

double lgamma(double x) {
  require_positive(x, "lgamma");
  return lanczos(x);
}

double digamma(double x) {
  require_positive(x, "digamma");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // ln x - 1/(2x) - sum B_2k / (2k x^2k)
  const double series =
      r * (1.0 / 12 -
           r * (1.0 / 120 -
                r * (1.0 / 252 - r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760 - r * (1.0 / 12)))))));
  return acc + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double acc = 0.0;
  while (x < 10.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double r = inv * inv;
  // 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
  const double series =
      inv * r *
      (1.0 / 6 -
       r * (1.0 / 30 - r * (1.0 / 42 - r * (1.0 / 30 - r * (5.0 / 66 - r * (691.0 / 2730 - r * (7.0 / 6)))))));
  return acc + inv + 0.5 * r + series;
}

}  // namespace tvae::special
