#pragma once

// Adaptive Simpson integration for oracle checks.

#include <algorithm>
#include <cmath>
#include <functional>

namespace oracle {

namespace detail {

inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                           double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Integral of f over [a, b] to absolute tolerance tol.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                               int max_depth = 50) {
  // A fixed pre-split keeps narrow peaks from being skipped.
  const int pieces = 64;
  const double h = (b - a) / pieces;
  double acc = 0.0;
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + i * h, hi = lo + h, mid = 0.5 * (lo + hi);
    const double flo = f(lo), fmid = f(mid), fhi = f(hi);
    acc += detail::simpson_step(f, lo, hi, flo, fmid, fhi, h / 6.0 * (flo + 4.0 * fmid + fhi), tol / pieces,
                                max_depth);
  }
  return acc;
}

/// ln of the integral of exp(g(t)) over [a, b]. g is shifted by its maximum on
/// a coarse grid so the integrand stays near unit scale.
inline double log_integral(const std::function<double(double)>& g, double a, double b, double rel_tol = 1e-13) {
  double peak = -INFINITY;
  const int grid = 4000;
  for (int i = 0; i <= grid; ++i) peak = std::max(peak, g(a + (b - a) * i / grid));
  const auto f = [&](double t) { return std::exp(g(t) - peak); };
  return peak + std::log(adaptive_simpson(f, a, b, rel_tol));
}

}  // namespace oracle
