#pragma once

// Dense-grid references for the component integrals of q(u) S(u) f(u),
// where S is the weight or its complement.  Densities come from oracles.hpp,
// so no library numerics are involved apart from evaluating the weight.

#include <cmath>

#include "mwle/weights.hpp"
#include "oracles.hpp"

namespace oracle {

inline double moment_factor(mwle::Moment m, double u, double scale) {
  switch (m) {
    case mwle::Moment::one: return 1.0;
    case mwle::Moment::value: return u;
    case mwle::Moment::log_value: return std::log(u);
    case mwle::Moment::log_shifted: return std::log(u + scale);
  }
  return 0.0;
}

// The complement side uses 1 - W evaluated without cancellation; 1.0 - w(u)
// loses all digits where W is within rounding of one.
inline double side_factor(const mwle::WeightConfig& w, mwle::Side side, double u) {
  return side == mwle::Side::weighted ? w(u) : w.complement(u);
}

inline double gamma_reference(const mwle::WeightConfig& w, const mwle::GammaComponent& c, mwle::Moment m,
                              mwle::Side side) {
  const double a = 1.0 / c.dispersion, scale = c.dispersion * c.mean;
  auto g = [&](double u) { return moment_factor(m, u, 0.0) * side_factor(w, side, u) * gamma_pdf(u, c.mean, c.dispersion); };
  const double lo = std::log(scale) - 35.0 / a - 5.0;
  const double hi = std::log(scale * (a + 90.0 + 15.0 * std::sqrt(a)));
  return log_grid_integral(g, lo, hi, w.breakpoints());
}

inline double lomax_reference(const mwle::WeightConfig& w, const mwle::LomaxComponent& c, mwle::Moment m,
                              mwle::Side side) {
  auto g = [&](double u) { return moment_factor(m, u, c.scale) * side_factor(w, side, u) * lomax_pdf(u, c.scale, c.index); };
  const double decay = m == mwle::Moment::value ? c.index - 1.0 : c.index;
  return log_grid_integral(g, std::log(c.scale) - 35.0, std::log(c.scale) + 34.0 / decay, w.breakpoints());
}

}  // namespace oracle
