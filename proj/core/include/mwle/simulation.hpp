#pragma once

// Seeded Monte Carlo experiments: sample from a (possibly contaminated)
// mixture, fit every weight in a grid, and summarise the estimates.  Also a
// peaks-over-threshold Lomax fit used as an independent tail-index oracle.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mwle/asymptotics.hpp"
#include "mwle/gem.hpp"

namespace mwle {

// Reference truths for simulation studies, both with tail scale 1000 and
// tail index 2: two gamma bodies (weights 0.4, 0.4, 0.2; means 100, 300;
// dispersions 0.25) and three gamma bodies (weights 0.4, 0.3, 0.1, 0.2;
// means 50, 200, 600; dispersions 0.2).
MixtureParams two_body_benchmark();
MixtureParams three_body_benchmark();

// Bernoulli(epsilon) mixture of the base model and the contaminant.
std::vector<double> sample_contaminated(const MixtureParams& base, const ContaminationSpec& contamination,
                                        std::size_t n, std::uint64_t seed);

// Independent stream seed for replication `index` of a master seed.
std::uint64_t replication_seed(std::uint64_t master, std::uint64_t index);

struct ExperimentSpec {
  explicit ExperimentSpec(MixtureParams truth_model) : truth(std::move(truth_model)) {}

  MixtureParams truth;
  std::optional<ContaminationSpec> contamination;
  std::size_t fit_num_body = 2;
  // Weight specs in the parse_weight grammar; "qA" locations are resolved
  // against each replication's own sample.
  std::vector<std::string> weight_grid{"unit"};
  std::size_t n = 10000;
  int replications = 20;
  std::uint64_t seed = 1;
  GemMethod method = GemMethod::transformed;
  ThetaMode theta_mode = ThetaMode::fixed;
  std::optional<double> fixed_theta;  // defaults to the true scale in fixed mode
  double tol = 1e-5;
  int max_iter = 1000;
  bool accelerate = true;
  InitConfig init_config{};
  int threads = 0;  // 0: MWLE_THREADS or hardware concurrency
  bool keep_traces = false;
};

// One fit of one replication.
struct FitRecord {
  int replication = 0;
  std::size_t weight_index = 0;
  std::string weight;  // resolved spec
  bool ok = false;
  std::string error;
  std::vector<double> estimates;  // free parameters
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double worst_step = 0.0;  // min over iterations of L*(l) - L*(l-1)
  std::vector<TraceEntry> trace;  // only with keep_traces
};

struct ParameterSummary {
  std::string name;
  double truth = 0.0;  // NaN when the fitted layout has no counterpart
  double median = 0.0;
  double mean = 0.0;
  double sd = 0.0;
  double bias = 0.0;
  double mse = 0.0;
};

struct WeightSummary {
  std::string weight;  // as given in the grid
  int fits = 0;
  int failures = 0;
  int not_converged = 0;
  std::vector<ParameterSummary> parameters;
};

struct ReplicationSummary {
  std::vector<WeightSummary> weights;
  std::vector<FitRecord> records;  // ordered by (replication, weight)
};

ReplicationSummary run_experiment(const ExperimentSpec& spec);

// Thread count from MWLE_THREADS, else the hardware concurrency (at least 1).
int default_threads();

// Summary statistics over successful records; exposed for testing.
ParameterSummary summarize(const std::string& name, double truth, std::span<const double> values);

struct PotEstimate {
  double index = 0.0;
  double std_error = 0.0;
  std::size_t exceedances = 0;
  double objective = 0.0;  // maximized log-likelihood of the excesses
};

// Lomax fit with fixed scale to the excesses y - threshold of observations
// above threshold.  With excess_scale = theta + threshold this is the
// step-weight estimator with tail scale theta.
PotEstimate pot_oracle(std::span<const double> data, double threshold, double excess_scale);

}  // namespace mwle
