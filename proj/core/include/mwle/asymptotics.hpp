#pragma once

// Sandwich covariance of the weighted likelihood estimator, Wald intervals,
// relative efficiency against plain maximum likelihood, and influence
// functions under contamination.
//
// With s the score of log h and W the weight,
//     Lambda = E[W^2 s s'] - (E[W^2 s] E[W s]' + E[W s] E[W^2 s]') / E[W]
//              + E[W^2] / E[W]^2 E[W s] E[W s]'
//     Gamma  = -E[W s s'] + E[W s] E[W s]' / E[W]
// and the estimator is asymptotically normal with covariance
// Gamma^-1 Lambda Gamma^-1 / n.

#include <functional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mwle/distributions.hpp"
#include "mwle/weights.hpp"

namespace mwle {

struct SandwichPair {
  Eigen::MatrixXd lambda_hat;
  Eigen::MatrixXd gamma_hat;
  Eigen::MatrixXd covariance;  // Gamma^-1 Lambda Gamma^-1 / n
  std::size_t n = 0;
};

// Largest condition number (after unit-diagonal scaling) accepted for Gamma.
inline constexpr double kMaxCondition = 1e12;

// Empirical sandwich at a fitted parameter vector.  Expectations become
// sample means; E[W] is the model value I(params).
SandwichPair sandwich(std::span<const double> data, const MixtureParams& params, const WeightConfig& w);

// Assembles Lambda and Gamma from the moment pieces listed above.
struct SandwichMoments {
  Eigen::MatrixXd w2_score_outer;  // E[W^2 s s']
  Eigen::MatrixXd w_score_outer;   // E[W s s']
  Eigen::VectorXd w2_score;        // E[W^2 s]
  Eigen::VectorXd w_score;         // E[W s]
  double w2 = 0.0;                 // E[W^2]
  double w = 0.0;                  // E[W]
};
Eigen::MatrixXd lambda_matrix(const SandwichMoments& m);
Eigen::MatrixXd gamma_matrix(const SandwichMoments& m);

// Gamma^-1 B Gamma^-1 through symmetric solves; throws SingularMatrixError
// when Gamma is too badly conditioned.
Eigen::MatrixXd sandwich_product(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& lambda);

// tr(-Gamma^-1 Lambda) and its diagonal.
double effective_parameters(const SandwichPair& s);
Eigen::VectorXd effective_parameter_diagonal(const SandwichPair& s);

struct Interval {
  double lower;
  double upper;
};

std::vector<double> standard_errors(const Eigen::MatrixXd& covariance);

// Two-sided Wald intervals estimate +- z sqrt(cov_pp) for every free
// parameter, in the canonical order.
std::vector<Interval> wald_ci(const MixtureParams& params, const Eigen::MatrixXd& covariance, double level);

// Population moments under h(.; params) by quadrature.
SandwichMoments population_moments(const MixtureParams& params, const WeightConfig& w);

struct PopulationMatrices {
  Eigen::MatrixXd lambda;
  Eigen::MatrixXd gamma;
  Eigen::MatrixXd fisher;  // E[s s']
  SandwichMoments moments;
};
PopulationMatrices population_matrices(const MixtureParams& params, const WeightConfig& w);

// Asymptotic variance ratio MLE / MWLE of a smooth functional with the
// given gradient (length = number of free parameters).
double aeff(const MixtureParams& params, const WeightConfig& w, std::span<const double> functional_gradient);

// Gradient selecting the tail index.
std::vector<double> tail_index_gradient(const MixtureParams& params);

struct PointMass {
  double location;
};
struct LomaxContaminant {
  double scale;
  double index;
};
struct ModelItself {};

using ContaminantAtom = std::variant<PointMass, LomaxContaminant, ModelItself>;

// A contamination distribution M: a finite mixture of atoms with the given
// shares (a single atom has share 1).
struct ContaminationSpec {
  std::vector<ContaminantAtom> atoms;
  std::vector<double> shares;
  double epsilon = 0.0;

  ContaminationSpec(ContaminantAtom atom, double eps = 0.0);
  ContaminationSpec(std::vector<ContaminantAtom> atoms, std::vector<double> shares, double eps = 0.0);
};

// -Gamma^-1 { E_M[W s] - E_M[W] / E_0[W] E_0[W s] } at params.
Eigen::VectorXd influence_function(const MixtureParams& params, const WeightConfig& w,
                                   const ContaminationSpec& contaminant);

// E_M[q] for a scalar function q, under the contamination distribution.
// ModelItself atoms integrate against h(.; params).
double contaminant_expectation(const ContaminationSpec& m, const MixtureParams& params,
                               const std::function<double(double)>& q);

// E[q(Y)] under h(.; params) by per-component quadrature.  breaks lists
// points (on the data scale) where q has kinks.
double model_expectation(const MixtureParams& params, const std::function<double(double)>& q,
                         std::span<const double> breaks = {});

}  // namespace mwle
