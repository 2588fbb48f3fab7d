#pragma once

// Generalized EM for maximum weighted likelihood.
//
// Method 1 augments the sample with the observations that the weighting
// would have discarded (a geometric number of hypothetical draws from the
// fitted model restricted by 1 - W).  Method 2 reparametrises the mixing
// weights as pi*_j = pi_j I_j / I, under which the weighted objective is the
// log-likelihood of a mixture of the component densities tilted by W.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mwle/distributions.hpp"
#include "mwle/init.hpp"
#include "mwle/likelihood.hpp"
#include "mwle/weights.hpp"

namespace mwle {

enum class GemMethod { hypothetical, transformed };

std::string to_string(GemMethod m);
GemMethod parse_method(const std::string& text);

struct EStepHypothetical {
  Eigen::MatrixXd z;               // n x (J + 1) responsibilities
  double k = 0.0;                  // expected number of discarded draws per observed one
  std::vector<double> z_prime;     // class probabilities of a discarded draw (J + 1)
  std::vector<double> y_hat;       // E[Y' | body class j]
  std::vector<double> log_y_hat;   // E[log Y' | body class j]
  double log_y_theta_hat = 0.0;    // E[log(Y' + theta) | tail class]
};

struct EStepTransformed {
  Eigen::MatrixXd z_star;  // n x (J + 1)
};

EStepHypothetical estep_m1(const WeightedSample& s, const MixtureParams& p, const WeightConfig& w);
MixtureParams mstep_m1(const WeightedSample& s, const EStepHypothetical& e, const WeightConfig& w,
                       const MixtureParams& current);

// Expected complete-data objective of Method 1 at params, given an E-step.
double q_function_m1(const WeightedSample& s, const EStepHypothetical& e, const MixtureParams& params);

// Transformed-weight E-step.  pi_star holds the J + 1 transformed weights;
// the component parameters are taken from p.
EStepTransformed estep_m2(const WeightedSample& s, std::span<const double> pi_star, const MixtureParams& p,
                          const WeightConfig& w);

struct TransformedParams {
  MixtureParams params;         // component parameters; weights are back-transformed
  std::vector<double> pi_star;  // transformed weights
};

TransformedParams mstep_m2(const WeightedSample& s, const EStepTransformed& e, const WeightConfig& w,
                           const MixtureParams& current);

// Expected objective of Method 2 (transformed weights pi_star) at p.
double q_function_m2(const WeightedSample& s, const EStepTransformed& e, std::span<const double> pi_star,
                     const MixtureParams& p, const WeightConfig& w);

std::vector<double> pi_forward(std::span<const double> pi, std::span<const double> component_integrals);
std::vector<double> pi_backtransform(std::span<const double> pi_star, std::span<const double> component_integrals);

// Mean absolute log-ratio of successive free-parameter vectors.
double relative_change(const MixtureParams& previous, const MixtureParams& current);

// Step-lengthening proposal exp(log x + a (log x - log x_prev2)) with
// a in {1, 2, 4}; returns current unless the objective improves.
struct AccelerationResult {
  MixtureParams params;
  double objective;
  bool accepted;
};

template <class Objective>
AccelerationResult accelerate(const MixtureParams& previous2, const MixtureParams& current,
                              double current_objective, Objective&& objective);

struct TraceEntry {
  int iteration;
  double objective;
  double delta_rel;  // NaN for the starting point
};

struct FitOptions {
  std::size_t num_body = 2;
  GemMethod method = GemMethod::transformed;
  ThetaMode theta_mode = ThetaMode::estimated;
  std::optional<double> fixed_theta;         // overrides the initial theta
  std::optional<MixtureParams> init;         // skips CMM initialization
  InitConfig init_config{};
  double tol = 1e-5;
  int max_iter = 1000;
  bool accelerate = true;
};

struct FitResult {
  MixtureParams params;
  ObjectiveValue objective;
  int iterations = 0;
  bool converged = false;
  GemMethod method = GemMethod::transformed;
  std::vector<TraceEntry> trace;
  std::optional<Eigen::MatrixXd> covariance;
  std::optional<std::vector<double>> std_errors;
  std::optional<std::vector<double>> pi_star;
  std::vector<std::string> warnings;
};

FitResult fit(std::span<const double> data, const WeightConfig& w, const FitOptions& options);

// Raised when the objective becomes non-finite; carries the trace so far.
class FitAborted : public NumericalError {
 public:
  FitAborted(const std::string& what, std::vector<TraceEntry> trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const std::vector<TraceEntry>& trace() const { return trace_; }

 private:
  std::vector<TraceEntry> trace_;
};

// ---- template implementation -------------------------------------------

namespace detail {
MixtureParams extrapolate(const MixtureParams& previous2, const MixtureParams& current, double step);
}

template <class Objective>
AccelerationResult accelerate(const MixtureParams& previous2, const MixtureParams& current,
                              double current_objective, Objective&& objective) {
  AccelerationResult best{current, current_objective, false};
  for (double step : {1.0, 2.0, 4.0}) {
    std::optional<MixtureParams> proposal;
    try {
      proposal = detail::extrapolate(previous2, current, step);
    } catch (const DomainError&) {
      break;
    }
    double value;
    try {
      value = objective(*proposal);
    } catch (const NumericalError&) {
      break;
    }
    if (!(value > best.objective)) break;
    best = {*proposal, value, true};
  }
  return best;
}

}  // namespace mwle
