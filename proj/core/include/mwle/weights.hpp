#pragma once

// Observation weight functions and the component-level integrals they induce.
//
// A weight function W maps a loss size to [0, 1].  Weighted likelihood
// estimation needs integrals of the form
//     int q(u) W(u) f(u) du        (weighted side)
//     int q(u) (1 - W(u)) f(u) du  (complement side)
// for each mixture component f and q in {1, u, log u, log(u + theta)}.

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mwle/distributions.hpp"
#include "mwle/quadrature.hpp"

namespace mwle {

struct UnitWeight {
  friend bool operator==(const UnitWeight&, const UnitWeight&) = default;
};

// W(y) = 1{y >= threshold}: plain left truncation.
struct StepWeight {
  double threshold;
  friend bool operator==(const StepWeight&, const StepWeight&) = default;
};

// W(y) = 1 - exp(-y / location).
struct ExpCdfWeight {
  double location;
  friend bool operator==(const ExpCdfWeight&, const ExpCdfWeight&) = default;
};

// W(y) = floor + (1 - floor) 1{y > location}.
struct TwoPointWeight {
  double location;
  double floor;
  friend bool operator==(const TwoPointWeight&, const TwoPointWeight&) = default;
};

// W(y) = point_mass + (1 - point_mass) G(y), G the gamma CDF with the given
// mean (location) and dispersion.
struct ZigWeight {
  double point_mass;
  double location;
  double dispersion;
  friend bool operator==(const ZigWeight&, const ZigWeight&) = default;
};

class WeightConfig {
 public:
  using Kind = std::variant<UnitWeight, StepWeight, ExpCdfWeight, TwoPointWeight, ZigWeight>;

  WeightConfig() = default;
  WeightConfig(Kind kind);  // validates parameters

  static WeightConfig unit() { return WeightConfig(); }
  static WeightConfig step(double threshold) { return WeightConfig(StepWeight{threshold}); }
  static WeightConfig exp_cdf(double location) { return WeightConfig(ExpCdfWeight{location}); }
  static WeightConfig two_point(double location, double floor) {
    return WeightConfig(TwoPointWeight{location, floor});
  }
  static WeightConfig zig(double point_mass, double location, double dispersion) {
    return WeightConfig(ZigWeight{point_mass, location, dispersion});
  }

  double operator()(double y) const;
  // 1 - W(y), evaluated without cancellation.
  double complement(double y) const;

  // True when W is identically one on (0, inf); the estimator is then the MLE.
  bool is_unit() const;
  const Kind& kind() const { return kind_; }

  // Points where W is non-smooth or changes fastest.
  std::vector<double> breakpoints() const;

  // Canonical text form, parseable by parse_weight().
  std::string to_string() const;

  friend bool operator==(const WeightConfig&, const WeightConfig&) = default;

 private:
  Kind kind_{UnitWeight{}};
};

// Parses "unit", "step:T", "expcdf:M", "twopoint:M,F", "zig:XI,M,PHI".
// A location may be given as "qA" to mean the empirical A-quantile of
// sample (which must then be non-empty).
WeightConfig parse_weight(const std::string& text, std::span<const double> sample = {});

// Empirical quantile used to resolve "qA" locations: sorted[ceil(nA)]
// (0-based), clamped to the largest observation.
double empirical_quantile(std::span<const double> data, double level);

struct GammaComponent {
  double mean;
  double dispersion;
};

struct LomaxComponent {
  double scale;
  double index;
};

enum class Moment { one, value, log_value, log_shifted };
enum class Side { weighted, complement };

// Integral of q(u) S(u) f(u), where S is W or 1 - W according to side.
// Uses closed forms where they exist and adaptive quadrature otherwise.
// Gamma components accept one, value and log_value; Lomax components
// accept one, value and log_shifted (q = log(u + scale)).
double component_weighted_integral(const WeightConfig& w, const GammaComponent& c, Moment m,
                                   Side side = Side::weighted);
double component_weighted_integral(const WeightConfig& w, const LomaxComponent& c, Moment m,
                                   Side side = Side::weighted);

// Same integrals by direct quadrature, for any weight.
double component_weighted_integral_quadrature(const WeightConfig& w, const GammaComponent& c,
                                              Moment m, Side side, const quad::Options& opt = {});
double component_weighted_integral_quadrature(const WeightConfig& w, const LomaxComponent& c,
                                              Moment m, Side side, const quad::Options& opt = {});

// Weighted masses I_j = int W f_j of each component (body first, tail last).
std::vector<double> component_normalizers(const WeightConfig& w, const MixtureParams& p);

// I = int W h = sum_j pi_j I_j.
double normalizer(const WeightConfig& w, const MixtureParams& p);

}  // namespace mwle
