#pragma once

// One-dimensional optimisation and root finding used by the M-steps and by
// quantile inversion.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "mwle/error.hpp"

namespace mwle::opt {

struct ScalarOptimum {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
};

// Brent's method (golden section plus parabolic steps) for a local minimum of
// f on [lo, hi], with absolute x tolerance abs_tol.
template <class F>
ScalarOptimum brent_minimize(F&& f, double lo, double hi, double abs_tol, int max_iter = 200) {
  if (!(lo < hi)) throw DomainError("brent_minimize: empty interval");
  constexpr double golden = 0.3819660112501051;
  const double eps = std::sqrt(std::numeric_limits<double>::epsilon());
  double a = lo, b = hi;
  double x = a + golden * (b - a);
  double w = x, v = x;
  double fx = f(x);
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  int evals = 1;
  for (int iter = 0; iter < max_iter; ++iter) {
    const double m = 0.5 * (a + b);
    const double tol = eps * std::abs(x) + abs_tol / 3.0;
    const double tol2 = 2.0 * tol;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;
    bool golden_step = true;
    if (std::abs(e) > tol) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double etemp = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * etemp) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (x < m) ? tol : -tol;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x < m) ? b - x : a - x;
      d = golden * e;
    }
    const double u = (std::abs(d) >= tol) ? x + d : x + (d > 0.0 ? tol : -tol);
    const double fu = f(u);
    ++evals;
    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx, evals};
}

// Maximises g over a positive scalar, searching in log space from x0 and
// never leaving [x0 * lo_factor, x0 * hi_factor].  Starts by bracketing the
// local maximum nearest to x0, so repeated calls track a single mode.  The
// returned point is never worse than x0.
template <class G>
ScalarOptimum maximize_positive(G&& g, double x0, double rel_tol = 1e-10,
                                double lo_factor = 1e-6, double hi_factor = 1e6) {
  if (!(x0 > 0.0) || !std::isfinite(x0)) throw DomainError("maximize_positive: start must be positive");
  const double s0 = std::log(x0);
  const double s_lo = s0 + std::log(lo_factor);
  const double s_hi = s0 + std::log(hi_factor);
  int evals = 0;
  auto h = [&](double s) {
    ++evals;
    const double v = g(std::exp(s));
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };
  const double h0 = h(s0);
  double step = 0.05;
  double left = std::max(s0 - step, s_lo), right = std::min(s0 + step, s_hi);
  double h_left = h(left), h_right = h(right);
  // Walk downhill until the minimum of h is bracketed.
  double lo = left, hi = right;
  if (h_left < h0 || h_right < h0) {
    const bool go_right = h_right <= h_left;
    double prev = s0;
    double cur = go_right ? right : left;
    double h_cur = go_right ? h_right : h_left;
    double width = step;
    while (true) {
      width *= 1.618;
      const double next = go_right ? std::min(cur + width, s_hi) : std::max(cur - width, s_lo);
      const double h_next = (next == cur) ? h_cur : h(next);
      if (h_next >= h_cur || next == cur) {
        lo = go_right ? prev : next;
        hi = go_right ? next : prev;
        break;
      }
      prev = cur;
      cur = next;
      h_cur = h_next;
    }
  }
  const auto best = brent_minimize(h, lo, hi, rel_tol);
  if (best.value <= h0) return {std::exp(best.x), -best.value, evals};
  return {x0, -h0, evals};
}

// Brent's root finder (Dekker/Brent zeroin) on a sign-changing bracket.
template <class F>
double brent_root(F&& f, double a, double b, double abs_tol, int max_iter = 300) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0)) throw DomainError("brent_root: interval does not bracket a root");
  double c = a, fc = fa;
  double d = b - a, e = d;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int iter = 0; iter < max_iter; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a; fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol = 2.0 * eps * std::abs(b) + 0.5 * abs_tol;
    const double m = 0.5 * (c - b);
    if (std::abs(m) <= tol || fb == 0.0) return b;
    if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q; else p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol) ? d : (m > 0.0 ? tol : -tol);
    fb = f(b);
  }
  throw NumericalError("brent_root did not converge");
}

}  // namespace mwle::opt
