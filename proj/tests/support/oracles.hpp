#pragma once

// Independent reference computations for the test suites.  Nothing here
// calls into the library's numerics: integrals are composite Simpson sums on
// a dense log-scale grid, derivatives are central differences, and special
// functions come from Boost.Math.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

// Composite Simpson on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double odd = 0.0, even = 0.0;
  for (int i = 1; i < panels; ++i) {
    const double v = f(a + i * h);
    (i % 2 ? odd : even) += v;
  }
  return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

// Integral of g(u) over (e^s_lo, e^s_hi) through u = e^s, split at the
// given breakpoints (data scale) so that jumps fall on panel edges.
inline double log_grid_integral(const std::function<double(double)>& g, double s_lo, double s_hi,
                                std::vector<double> breaks = {}, int panels_per_unit = 4000) {
  std::vector<double> edges{s_lo};
  std::sort(breaks.begin(), breaks.end());
  for (double b : breaks) {
    if (b > 0.0 && std::log(b) > s_lo && std::log(b) < s_hi) edges.push_back(std::log(b));
  }
  edges.push_back(s_hi);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double a = edges[k], b = edges[k + 1];
    const int panels = std::max(2, static_cast<int>(std::ceil((b - a) * panels_per_unit)));
    // Values on a jump edge are taken from inside the panel.
    const double nudge = 1e-13 * std::max(1.0, std::abs(b - a));
    auto h = [&](double s) {
      const double t = std::clamp(s, a + nudge, b - nudge);
      const double u = std::exp(t);
      return g(u) * u;
    };
    total += simpson(h, a, b, panels);
  }
  return total;
}

// Central-difference derivative with relative step.
inline double derivative(const std::function<double(double)>& f, double x, double rel_step = 1e-6) {
  const double h = rel_step * std::max(1.0, std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline std::vector<double> gradient(const std::function<double(const std::vector<double>&)>& f,
                                    const std::vector<double>& x, double rel_step = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    auto partial = [&](double v) {
      auto y = x;
      y[k] = v;
      return f(y);
    };
    g[k] = derivative(partial, x[k], rel_step);
  }
  return g;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Gamma density with mean/dispersion parameters, straight from the formula.
inline double gamma_pdf(double y, double mean, double dispersion) {
  const double a = 1.0 / dispersion;
  const double b = 1.0 / (dispersion * mean);
  return std::exp(a * std::log(b) + (a - 1.0) * std::log(y) - b * y - std::lgamma(a));
}

inline double lomax_pdf(double y, double scale, double index) {
  return index / scale * std::pow(1.0 + y / scale, -index - 1.0);
}

inline double lomax_sf(double y, double scale, double index) { return std::pow(1.0 + y / scale, -index); }

// Inverse-CDF Lomax draws from a separate generator.
inline std::vector<double> lomax_draws(std::size_t n, double scale, double index, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& y : out) y = scale * (std::pow(1.0 - u(gen), -1.0 / index) - 1.0);
  return out;
}

}  // namespace oracle
