#ifndef ENDOSIM_ANALYSIS_HPP
#define ENDOSIM_ANALYSIS_HPP

// Small curve utilities used by the experiment drivers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace endosim::analysis {

namespace detail {

/// Residual sum of squares of c0 + c1 cos(2 pi f t) + c2 sin(2 pi f t).
inline double harmonic_rss(std::span<const double> t, std::span<const double> y, double f) {
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = 2.0 * std::numbers::pi * f * t[i];
    a(i, 0) = 1.0;
    a(i, 1) = std::cos(w);
    a(i, 2) = std::sin(w);
    b(i) = y[i];
  }
  const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
  return (a * c - b).squaredNorm();
}

}  // namespace detail

/// Least-squares frequency of a single harmonic, searched within
/// guess * [1 - rel, 1 + rel].
inline double fit_frequency(std::span<const double> t, std::span<const double> y, double guess, double rel = 0.25) {
  if (t.size() != y.size() || t.size() < 8) throw std::invalid_argument("fit_frequency: need >= 8 paired samples");
  if (!(guess > 0.0)) throw std::invalid_argument("fit_frequency: guess must be positive");
  const double lo = guess * (1.0 - rel), hi = guess * (1.0 + rel);
  constexpr int coarse = 201;
  double best_f = lo, best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < coarse; ++i) {
    const double f = lo + (hi - lo) * i / (coarse - 1);
    const double r = detail::harmonic_rss(t, y, f);
    if (r < best) {
      best = r;
      best_f = f;
    }
  }
  // Golden-section refinement around the coarse minimum.
  const double step = (hi - lo) / (coarse - 1);
  double a = best_f - step, b = best_f + step;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = detail::harmonic_rss(t, y, c), fd = detail::harmonic_rss(t, y, d);
  for (int it = 0; it < 80; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = detail::harmonic_rss(t, y, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = detail::harmonic_rss(t, y, d);
    }
  }
  return 0.5 * (a + b);
}

/// Ordinary least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be positive");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Location of the largest sample in [t_lo, t_hi], refined by a parabola
/// through its neighbours.
inline double peak_time(std::span<const double> t, std::span<const double> y, double t_lo, double t_hi) {
  std::size_t best = t.size();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= t_lo && t[i] <= t_hi && (best == t.size() || y[i] > y[best])) best = i;
  if (best == t.size()) throw std::invalid_argument("peak_time: no samples in range");
  if (best == 0 || best + 1 >= t.size()) return t[best];
  const double y0 = y[best - 1], y1 = y[best], y2 = y[best + 1];
  const double denom = y0 - 2.0 * y1 + y2;
  if (denom >= 0.0) return t[best];
  const double h = t[best + 1] - t[best];
  return t[best] + 0.5 * h * (y0 - y2) / denom;
}

}  // namespace endosim::analysis

#endif  // ENDOSIM_ANALYSIS_HPP
