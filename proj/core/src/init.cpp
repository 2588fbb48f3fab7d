#include "mwle/init.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mwle/error.hpp"
#include "mwle/weights.hpp"

namespace mwle {
namespace {

constexpr double kDispersionFloor = 1e-4;

struct PrefixSums {
  std::vector<double> s1, s2;

  explicit PrefixSums(std::span<const double> v) : s1(v.size() + 1, 0.0), s2(v.size() + 1, 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      s1[i + 1] = s1[i] + v[i];
      s2[i + 1] = s2[i] + v[i] * v[i];
    }
  }
  double mean(std::size_t a, std::size_t b) const { return (s1[b] - s1[a]) / static_cast<double>(b - a); }
  double sse(std::size_t a, std::size_t b) const {
    if (b <= a) return 0.0;
    const double sum = s1[b] - s1[a];
    return std::max(0.0, (s2[b] - s2[a]) - sum * sum / static_cast<double>(b - a));
  }
};

// Lloyd iterations from the given centers.  Clusters on sorted data are
// contiguous, so assignment reduces to locating midpoints.
KMeansResult lloyd(std::span<const double> sorted, const PrefixSums& ps, std::vector<double> centers, Rng& rng) {
  const std::size_t n = sorted.size();
  const std::size_t k = centers.size();
  std::vector<std::size_t> bounds(k + 1, 0);
  for (int iter = 0; iter < 1000; ++iter) {
    std::sort(centers.begin(), centers.end());
    std::vector<std::size_t> next(k + 1, 0);
    next[k] = n;
    for (std::size_t j = 1; j < k; ++j) {
      const double mid = 0.5 * (centers[j - 1] + centers[j]);
      next[j] = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), mid) - sorted.begin());
    }
    bool reseeded = false;
    for (std::size_t j = 0; j < k; ++j) {
      if (next[j + 1] <= next[j]) {
        centers[j] = sorted[static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)) % n];
        reseeded = true;
      }
    }
    if (reseeded) continue;
    if (next == bounds) break;
    bounds = next;
    for (std::size_t j = 0; j < k; ++j) centers[j] = ps.mean(bounds[j], bounds[j + 1]);
  }
  KMeansResult out;
  out.boundaries = bounds;
  out.centers = centers;
  for (std::size_t j = 0; j < k; ++j) {
    out.sizes.push_back(bounds[j + 1] - bounds[j]);
    out.inertia += ps.sse(bounds[j], bounds[j + 1]);
  }
  return out;
}

double r_squared(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy * sxy / (sxx * syy);
}

}  // namespace

KMeansResult kmeans_1d(std::span<const double> sorted, std::size_t k, int restarts, std::uint64_t seed) {
  if (k == 0) throw DomainError("k-means needs at least one cluster");
  if (restarts < 1) throw DomainError("k-means needs at least one restart");
  if (!std::is_sorted(sorted.begin(), sorted.end())) throw DomainError("k-means input must be sorted");
  std::vector<double> distinct(sorted.begin(), sorted.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < k) throw DomainError("fewer distinct body observations than components");

  const PrefixSums ps(sorted);
  Rng rng(seed);
  const std::size_t n = sorted.size();
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    std::vector<double> centers;
    if (r == 0) {
      for (std::size_t j = 0; j < k; ++j) {
        const double level = (static_cast<double>(j) + 0.5) / static_cast<double>(k);
        centers.push_back(sorted[std::min(n - 1, static_cast<std::size_t>(level * static_cast<double>(n)))]);
      }
    } else {
      std::vector<double> pool(distinct);
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t pick = j + static_cast<std::size_t>(rng.uniform() * static_cast<double>(pool.size() - j));
        std::swap(pool[j], pool[std::min(pick, pool.size() - 1)]);
        centers.push_back(pool[j]);
      }
    }
    // Duplicate seeds collapse clusters; nudge them onto distinct values.
    std::sort(centers.begin(), centers.end());
    for (std::size_t j = 1; j < k; ++j) {
      if (centers[j] <= centers[j - 1]) {
        const auto it = std::upper_bound(distinct.begin(), distinct.end(), centers[j - 1]);
        centers[j] = (it != distinct.end()) ? *it : centers[j - 1];
      }
    }
    auto result = lloyd(sorted, ps, std::move(centers), rng);
    if (result.inertia < best.inertia) best = std::move(result);
  }
  return best;
}

double auto_tail_threshold(std::span<const double> data) {
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> log_y(n), log_s(n);
  for (std::size_t i = 0; i < n; ++i) {
    log_y[i] = std::log(sorted[i]);
    log_s[i] = std::log(static_cast<double>(n - i) / static_cast<double>(n + 1));
  }
  double best_level = 0.95, best_r2 = -1.0;
  for (int step = 0; step < 20; ++step) {
    const double level = 0.90 + 0.005 * step;
    const std::size_t start = std::min(n - 1, static_cast<std::size_t>(std::ceil(level * static_cast<double>(n))));
    if (n - start < 5) break;
    const double r2 = r_squared(std::span(log_y).subspan(start), std::span(log_s).subspan(start));
    if (r2 > best_r2) {
      best_r2 = r2;
      best_level = level;
    }
  }
  return empirical_quantile(sorted, best_level);
}

InitResult cmm_init(std::span<const double> data, std::size_t num_body, const InitConfig& config) {
  if (data.empty()) throw DomainError("initialization needs data");
  for (double y : data) {
    if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("initialization requires positive observations");
  }
  std::vector<std::string> warnings;
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  double tau = 0.0;
  if (num_body > 0) {
    switch (config.threshold) {
      case InitConfig::Threshold::quantile:
        if (!(config.threshold_level > 0.0 && config.threshold_level < 1.0))
          throw DomainError("tail threshold level must lie in (0, 1)");
        tau = empirical_quantile(sorted, config.threshold_level);
        break;
      case InitConfig::Threshold::absolute: tau = config.threshold_value; break;
      case InitConfig::Threshold::automatic: tau = auto_tail_threshold(sorted); break;
    }
  }
  const std::size_t split =
      static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), tau) - sorted.begin());
  const std::span<const double> body(sorted.data(), split);
  const std::span<const double> tail(sorted.data() + split, n - split);
  if (tail.size() < 2) throw DomainError("initialization needs at least two observations above the tail threshold");

  // Tail: match the first two raw moments to the Lomax.
  double m1 = 0.0, m2 = 0.0;
  for (double y : tail) {
    m1 += y;
    m2 += y * y;
  }
  m1 /= static_cast<double>(tail.size());
  m2 /= static_cast<double>(tail.size());
  const double ratio = m2 / (m1 * m1);
  double gamma0, theta0;
  if (ratio > 2.0 && std::isfinite(ratio)) {
    gamma0 = 2.0 * (ratio - 1.0) / (ratio - 2.0);
    theta0 = m1 * (gamma0 - 1.0);
  } else {
    gamma0 = 2.5;
    theta0 = 1.5 * m1;
    warnings.emplace_back("tail moments imply index <= 2; using index 2.5 and scale 1.5 x tail mean");
  }

  const double tail_share = static_cast<double>(tail.size()) / static_cast<double>(n);
  std::vector<double> weights, means, disps;
  if (num_body > 0) {
    const auto km = kmeans_1d(body, num_body, config.kmeans_restarts, config.seed);
    for (std::size_t j = 0; j < num_body; ++j) {
      const std::size_t a = km.boundaries[j], b = km.boundaries[j + 1];
      const double size = static_cast<double>(b - a);
      double mean = 0.0;
      for (std::size_t i = a; i < b; ++i) mean += body[i];
      mean /= size;
      double var = 0.0;
      for (std::size_t i = a; i < b; ++i) var += (body[i] - mean) * (body[i] - mean);
      var /= size;
      double disp = var / (mean * mean);
      if (disp < kDispersionFloor) {
        disp = kDispersionFloor;
        warnings.push_back("cluster " + std::to_string(j + 1) + " has (near) zero spread; dispersion floored");
      }
      weights.push_back(size / static_cast<double>(body.size()) * (1.0 - tail_share));
      means.push_back(mean);
      disps.push_back(disp);
    }
    weights.push_back(tail_share);
  } else {
    weights.push_back(1.0);
  }
  MixtureParams params(std::move(weights), std::move(means), std::move(disps), theta0, gamma0);
  return {std::move(params), tau, std::move(warnings)};
}

}  // namespace mwle
