#pragma once
// Survival functions for Wald and t tests.
//
// Every function has a log-space twin so that p-values far below 1e-300 keep
// their magnitude. Incomplete gamma: series below x < a + 1, Lentz continued
// fraction above. Incomplete beta: continued fraction with the usual symmetry
// swap.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dlgwas/error.hpp"

namespace dlgwas::special {

namespace detail {

inline constexpr double kEps = 1e-16;
inline constexpr double kTiny = 1e-300;
inline constexpr int kMaxIter = 100000;

// log of the lower regularized gamma series sum, returns log P(a, x).
inline double log_gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  return std::log(sum) - x + a * std::log(x) - std::lgamma(a);
}

// log Q(a, x) by modified Lentz continued fraction.
inline double log_gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return std::log(h) - x + a * std::log(x) - std::lgamma(a);
}

// Continued fraction for the incomplete beta (Numerical Recipes betacf),
// with y = 1 - x supplied separately to avoid cancellation.
inline double beta_cf(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// log of I_x(a, b) evaluated directly by the continued fraction; accurate when
// x < (a + 1) / (a + b + 2).
inline double log_ibeta_direct(double a, double b, double x, double y) {
  return a * std::log(x) + b * std::log(y) - log_beta_fn(a, b) - std::log(a) + std::log(beta_cf(a, b, x));
}

inline double log1mexp(double l) {
  // log(1 - exp(l)) for l <= 0
  return l > -std::numbers::ln2 ? std::log(-std::expm1(l)) : std::log1p(-std::exp(l));
}

}  // namespace detail

// log of the regularized upper incomplete gamma Q(a, x).
inline double log_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw ConfigError("incomplete gamma needs a > 0");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return detail::log1mexp(detail::log_gamma_p_series(a, x));
  return detail::log_gamma_q_cf(a, x);
}

inline double gamma_q(double a, double x) { return std::exp(log_gamma_q(a, x)); }

inline double gamma_p(double a, double x) {
  if (!(a > 0.0)) throw ConfigError("incomplete gamma needs a > 0");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return std::exp(detail::log_gamma_p_series(a, x));
  return -std::expm1(detail::log_gamma_q_cf(a, x));
}

// log of the regularized incomplete beta I_x(a, b); y must equal 1 - x and
// is passed explicitly to keep precision when x is close to 1.
inline double log_ibeta(double a, double b, double x, double y) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  if (y <= 0.0) return 0.0;
  if (x < (a + 1.0) / (a + b + 2.0)) return detail::log_ibeta_direct(a, b, x, y);
  return detail::log1mexp(detail::log_ibeta_direct(b, a, y, x));
}

inline double ibeta(double a, double b, double x) { return std::exp(log_ibeta(a, b, x, 1.0 - x)); }

// log P(Z > z) for a standard normal.
inline double log_normal_sf(double z) {
  if (z < 37.0) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
  // Mills-ratio asymptotic series; relative error < 1e-15 for z >= 37.
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) + 105.0 / (z2 * z2 * z2 * z2);
  return -0.5 * z2 - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

inline void require_df(double df) {
  if (!(df >= 1.0) || !std::isfinite(df)) throw ConfigError("degrees of freedom must be >= 1, got " + std::to_string(df));
}

inline double log_chi2_sf(double x, double df) {
  require_df(df);
  return log_gamma_q(0.5 * df, 0.5 * x);
}

inline double chi2_sf(double x, double df) { return std::exp(log_chi2_sf(x, df)); }

// log P(T > t) for Student's t with df degrees of freedom.
inline double log_t_sf(double t, double df) {
  require_df(df);
  const double t2 = t * t;
  const double x = df / (df + t2);
  const double y = t2 / (df + t2);
  const double log_tail = std::log(0.5) + log_ibeta(0.5 * df, 0.5, x, y);  // P(T > |t|)
  return t >= 0.0 ? log_tail : detail::log1mexp(log_tail);
}

inline double t_sf(double t, double df) { return std::exp(log_t_sf(t, df)); }

// Two-sided p-values, natural log.
inline double log_two_sided_normal_p(double z) { return std::numbers::ln2 + log_normal_sf(std::abs(z)); }

inline double log_two_sided_t_p(double t, double df) {
  return std::min(0.0, std::numbers::ln2 + log_t_sf(std::abs(t), df));
}

}  // namespace dlgwas::special
