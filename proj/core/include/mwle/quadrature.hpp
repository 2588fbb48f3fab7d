#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature.
//
// Intervals are bisected in order of decreasing error estimate until the
// summed estimate meets max(abs_tol, rel_tol * |I|, roundoff floor).  A miss
// raises NumericalError instead of returning an unreliable value.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <sstream>
#include <vector>

#include "mwle/error.hpp"

namespace mwle::quad {

struct Options {
  double rel_tol = 1e-12;
  double abs_tol = 0.0;
  int max_intervals = 4000;
};

struct Result {
  double value = 0.0;
  double abs_error = 0.0;
  double l1_norm = 0.0;
  int evaluations = 0;
};

namespace detail {

inline constexpr std::array<double, 8> kronrod_nodes{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kronrod_weights{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for the nodes kronrod_nodes[1], [3], [5], [7].
inline constexpr std::array<double, 4> gauss_weights{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error, l1;
  bool operator<(const Panel& other) const { return error < other.error; }
};

template <class F>
Panel gk15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  std::array<double, 15> fx{};
  fx[7] = f(center);
  for (int k = 0; k < 7; ++k) {
    const double dx = half * kronrod_nodes[k];
    fx[k] = f(center - dx);
    fx[14 - k] = f(center + dx);
  }
  double kronrod = kronrod_weights[7] * fx[7];
  double gauss = gauss_weights[3] * fx[7];
  double l1 = kronrod_weights[7] * std::abs(fx[7]);
  for (int k = 0; k < 7; ++k) {
    const double pair = fx[k] + fx[14 - k];
    kronrod += kronrod_weights[k] * pair;
    l1 += kronrod_weights[k] * (std::abs(fx[k]) + std::abs(fx[14 - k]));
    if (k % 2 == 1) gauss += gauss_weights[k / 2] * pair;
  }
  const double mean = 0.5 * kronrod;
  double asc = kronrod_weights[7] * std::abs(fx[7] - mean);
  for (int k = 0; k < 7; ++k) {
    asc += kronrod_weights[k] * (std::abs(fx[k] - mean) + std::abs(fx[14 - k] - mean));
  }
  kronrod *= half;
  gauss *= half;
  l1 *= std::abs(half);
  asc *= std::abs(half);
  double err = std::abs(kronrod - gauss);
  if (asc > 0.0 && err > 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
  const double round = 50.0 * std::numeric_limits<double>::epsilon() * l1;
  if (round > err) err = round;
  if (!std::isfinite(kronrod)) {
    std::ostringstream msg;
    msg << "non-finite integrand on [" << a << ", " << b << "]";
    throw NumericalError(msg.str());
  }
  return {a, b, kronrod, err, l1};
}

}  // namespace detail

// Integrates f over [points.front(), points.back()], treating interior points
// as known breakpoints of f.
template <class F>
Result integrate(F&& f, std::span<const double> points, const Options& opt = {}) {
  if (points.size() < 2) throw DomainError("quadrature needs at least two points");
  std::priority_queue<detail::Panel> heap;
  Result total;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (!(points[i + 1] >= points[i])) throw DomainError("quadrature breakpoints must be sorted");
    if (points[i + 1] == points[i]) continue;
    auto panel = detail::gk15(f, points[i], points[i + 1]);
    total.evaluations += 15;
    heap.push(panel);
  }
  const auto tally = [&] {
    double v = 0.0, e = 0.0, l = 0.0;
    auto copy = heap;
    while (!copy.empty()) {
      v += copy.top().value;
      e += copy.top().error;
      l += copy.top().l1;
      copy.pop();
    }
    total.value = v;
    total.abs_error = e;
    total.l1_norm = l;
  };
  tally();
  double value = total.value, error = total.abs_error, l1 = total.l1_norm;
  const double floor = 100.0 * std::numeric_limits<double>::epsilon();
  int intervals = static_cast<int>(heap.size());
  while (!heap.empty()) {
    const double target = std::max({opt.abs_tol, opt.rel_tol * std::abs(value), floor * l1});
    if (error <= target) break;
    if (intervals >= opt.max_intervals) {
      tally();
      std::ostringstream msg;
      msg.precision(6);
      msg << "quadrature did not converge on [" << points.front() << ", " << points.back()
          << "]: value " << total.value << ", error estimate " << total.abs_error << ", target "
          << target;
      throw NumericalError(msg.str());
    }
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // Interval can no longer be split: accept its contribution as is.
      auto frozen = worst;
      frozen.error = 0.0;
      heap.push(frozen);
      error -= worst.error;
      continue;
    }
    const auto left = detail::gk15(f, worst.a, mid);
    const auto right = detail::gk15(f, mid, worst.b);
    total.evaluations += 30;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    heap.push(left);
    heap.push(right);
    ++intervals;
    // Periodic exact re-summation keeps the running totals from drifting.
    if (intervals % 64 == 0) {
      tally();
      value = total.value;
      error = total.abs_error;
      l1 = total.l1_norm;
    }
  }
  tally();
  return total;
}

template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
  const std::array<double, 2> pts{a, b};
  return integrate(std::forward<F>(f), std::span<const double>(pts), opt);
}

// Integral of f over [a, inf) through x = a + scale * t / (1 - t).
template <class F>
Result integrate_to_infinity(F&& f, double a, double scale, const Options& opt = {}) {
  if (!(scale > 0.0)) throw DomainError("integrate_to_infinity: scale must be positive");
  auto mapped = [&](double t) {
    if (t >= 1.0) return 0.0;
    const double one_minus = 1.0 - t;
    const double x = a + scale * t / one_minus;
    if (!std::isfinite(x)) return 0.0;
    const double fx = f(x);
    if (fx == 0.0) return 0.0;
    return fx * scale / (one_minus * one_minus);
  };
  return integrate(mapped, 0.0, 1.0, opt);
}

}  // namespace mwle::quad
