#pragma once

// Clusterized method-of-moments starting values: split the data at a tail
// threshold, k-means the body, moment-match each cluster to a gamma
// component and the exceedances to the Lomax tail.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mwle/distributions.hpp"

namespace mwle {

struct InitConfig {
  enum class Threshold { quantile, absolute, automatic };

  Threshold threshold = Threshold::automatic;
  double threshold_level = 0.95;  // used with Threshold::quantile
  double threshold_value = 0.0;   // used with Threshold::absolute
  int kmeans_restarts = 10;
  std::uint64_t seed = 20240601;
  // fit() also starts from CMM at these threshold quantiles and keeps the
  // best final objective.  Thresholds equal to one already tried are skipped.
  std::vector<double> extra_start_levels{0.90, 0.99};
};

struct InitResult {
  MixtureParams params;
  double threshold;
  std::vector<std::string> warnings;
};

struct KMeansResult {
  std::vector<double> centers;         // ascending
  std::vector<std::size_t> sizes;      // observations per cluster
  std::vector<std::size_t> boundaries; // cluster j covers sorted[boundaries[j], boundaries[j+1])
  double inertia = 0.0;
};

// Lloyd's algorithm on sorted one-dimensional data.  Restart 0 is seeded at
// evenly spaced quantiles, later restarts at random observations.
KMeansResult kmeans_1d(std::span<const double> sorted, std::size_t k, int restarts, std::uint64_t seed);

// The candidate quantile (0.900, 0.905, ..., 0.995) whose suffix of the
// empirical log-survival against log-size plot is closest to a straight line.
double auto_tail_threshold(std::span<const double> data);

InitResult cmm_init(std::span<const double> data, std::size_t num_body, const InitConfig& config = {});

}  // namespace mwle
