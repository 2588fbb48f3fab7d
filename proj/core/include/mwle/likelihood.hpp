#pragma once

// Weighted log-likelihood with random-truncation adjustment,
//     L*(Phi) = sum_i W(y_i) [log h(y_i) + log W(y_i) - log I(Phi)],
// its gradient, and the truncated log-likelihood used by TAIC/TBIC.

#include <cstdint>
#include <span>
#include <vector>

#include "mwle/distributions.hpp"
#include "mwle/weights.hpp"

namespace mwle {

// Data with weights evaluated once; shared by the objective, the GEM steps
// and the sandwich estimator.
struct WeightedSample {
  std::vector<double> y;
  std::vector<double> log_y;
  std::vector<double> weight;
  double sum_weight = 0.0;
  double sum_weight_log_weight = 0.0;  // sum W log W, with 0 log 0 = 0

  std::size_t size() const { return y.size(); }
};

WeightedSample prepare_sample(std::span<const double> data, const WeightConfig& w);

struct ObjectiveValue {
  double value = 0.0;
  std::vector<double> contributions;
  double effective_n = 0.0;
};

ObjectiveValue weighted_loglik(std::span<const double> data, const MixtureParams& p, const WeightConfig& w);

// Objective value only, on a prepared sample.  log_normalizer may be passed
// when already known.
double weighted_loglik_value(const WeightedSample& s, const MixtureParams& p, const WeightConfig& w);
double weighted_loglik_value(const WeightedSample& s, const MixtureParams& p, double log_normalizer);

// Gradient of log I(Phi) with respect to the free parameters.
std::vector<double> log_normalizer_gradient(const WeightConfig& w, const MixtureParams& p);

std::vector<double> weighted_score(std::span<const double> data, const MixtureParams& p, const WeightConfig& w);

// sum over kept observations of log(h(y_i) W(y_i) / I(Phi)).
double truncated_loglik(std::span<const double> data, std::span<const std::uint8_t> keep, const MixtureParams& p,
                        const WeightConfig& w);

// Compensated (Neumaier) summation.
class AccurateSum {
 public:
  void add(double x);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace mwle
