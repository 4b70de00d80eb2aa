#pragma once

// Gamma-family special functions on the positive real axis.

namespace tvae::special {

inline constexpr double kEulerGamma = 0.57721566490153286061;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLn2Pi = 1.83787706640934548356;

/// ln Gamma(x) for x > 0 (Lanczos, g = 7, nine coefficients).
double lgamma(double x);

/// psi(x) = d/dx ln Gamma(x) for x > 0.
double digamma(double x);

/// psi'(x) for x > 0.
double trigamma(double x);

}  // namespace tvae::special
