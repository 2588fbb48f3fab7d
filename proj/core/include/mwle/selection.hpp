#pragma once

// Information criteria for choosing the number of body components, and the
// value-at-risk / conditional tail expectation of fitted and empirical
// distributions.
//
//   RAIC = -2 L* + 2 tr(-Gamma^-1 Lambda)     TAIC = -2 L* + 2 P
//   RBIC = -2 L* + log(n) tr(-Gamma^-1 Lambda) TBIC = -2 L* + log(sum W) P

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mwle/asymptotics.hpp"
#include "mwle/gem.hpp"

namespace mwle {

struct CriteriaReport {
  double objective = 0.0;  // L* at the fit
  std::size_t num_params = 0;
  std::size_t n = 0;
  double effective_n = 0.0;  // sum of weights
  double taic = 0.0;
  double tbic = 0.0;
  // Unavailable when the sandwich matrix is singular.
  std::optional<double> raic;
  std::optional<double> rbic;
  std::optional<double> effective_parameters;
  std::vector<double> effective_parameter_diagonal;
  bool negative_effective_parameter = false;  // some diagonal entry < 0
  std::string note;
};

// sandwich may be empty (e.g. it failed); RAIC/RBIC are then absent.
CriteriaReport criteria(double objective, const MixtureParams& params, const std::optional<SandwichPair>& sandwich,
                        std::span<const double> data, const WeightConfig& w);
CriteriaReport criteria(const FitResult& fit, const std::optional<SandwichPair>& sandwich,
                        std::span<const double> data, const WeightConfig& w);

enum class Criterion { raic, rbic, taic, tbic };
Criterion parse_criterion(const std::string& text);
std::string to_string(Criterion c);
// Criterion value, or nullopt when it is unavailable.
std::optional<double> criterion_value(const CriteriaReport& r, Criterion c);

struct ScanEntry {
  std::size_t num_body = 0;
  std::optional<FitResult> fit;
  std::optional<CriteriaReport> report;
  std::string error;  // non-empty when the fit failed
};

struct ScanResult {
  std::vector<ScanEntry> entries;
  std::optional<std::size_t> selected;  // index into entries for the requested criterion
  // Argmin index per criterion (absent when no entry has that criterion).
  std::optional<std::size_t> best_raic, best_rbic, best_taic, best_tbic;
};

// Fits every J in [j_min, j_max] and ranks by the criterion.  Fit failures
// are recorded and skipped.
ScanResult scan_components(std::span<const double> data, const WeightConfig& w, std::size_t j_min,
                           std::size_t j_max, const FitOptions& base, Criterion criterion = Criterion::tbic);

struct RiskMeasures {
  double var = 0.0;
  std::optional<double> cte;  // absent when the tail mean is infinite
};

// Model VaR and CTE at security level q.
RiskMeasures var_cte(const MixtureParams& params, double q);

// E[Y 1{Y > v}] under the model (infinite when the tail index is <= 1).
double partial_expectation(const MixtureParams& params, double v);

struct EmpiricalRisk {
  double var = 0.0;
  double cte = 0.0;
  std::size_t exceedances = 0;  // observations averaged for the CTE
  bool few_exceedances = false;  // fewer than five
};

// Order-statistic VaR sorted[ceil(nq)] (0-based, as empirical_quantile) and
// the mean of the observations from that order statistic up.
EmpiricalRisk empirical_var_cte(std::span<const double> data, double q);

}  // namespace mwle
