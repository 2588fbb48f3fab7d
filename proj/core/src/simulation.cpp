#include "mwle/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <thread>

#include "mwle/error.hpp"

namespace mwle {
namespace {

double draw_atom(const ContaminantAtom& atom, const MixtureParams& base, Rng& rng) {
  if (const auto* p = std::get_if<PointMass>(&atom)) return p->location;
  if (const auto* l = std::get_if<LomaxContaminant>(&atom)) return sample_lomax(rng, l->scale, l->index);
  return sample(base, 1, rng).front();
}

}  // namespace

MixtureParams two_body_benchmark() {
  return MixtureParams({0.4, 0.4, 0.2}, {100.0, 300.0}, {0.25, 0.25}, 1000.0, 2.0, ThetaMode::fixed);
}

MixtureParams three_body_benchmark() {
  return MixtureParams({0.4, 0.3, 0.1, 0.2}, {50.0, 200.0, 600.0}, {0.2, 0.2, 0.2}, 1000.0, 2.0, ThetaMode::fixed);
}

std::uint64_t replication_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> sample_contaminated(const MixtureParams& base, const ContaminationSpec& contamination,
                                        std::size_t n, std::uint64_t seed) {
  if (contamination.epsilon == 0.0) return sample(base, n, seed);
  Rng rng(seed);
  std::vector<double> cumulative(contamination.shares.size());
  std::partial_sum(contamination.shares.begin(), contamination.shares.end(), cumulative.begin());
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.uniform() < contamination.epsilon) {
      const double u = rng.uniform() * cumulative.back();
      const auto k = std::min<std::size_t>(
          static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin()),
          cumulative.size() - 1);
      out.push_back(draw_atom(contamination.atoms[k], base, rng));
    } else {
      out.push_back(sample(base, 1, rng).front());
    }
  }
  return out;
}

int default_threads() {
  if (const char* env = std::getenv("MWLE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

ParameterSummary summarize(const std::string& name, double truth, std::span<const double> values) {
  ParameterSummary s;
  s.name = name;
  s.truth = truth;
  if (values.empty()) {
    s.median = s.mean = s.sd = s.bias = s.mse = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  s.median = (m % 2 == 1) ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(m);
  double ss = 0.0, se = 0.0;
  for (double x : v) {
    ss += (x - s.mean) * (x - s.mean);
    se += (x - truth) * (x - truth);
  }
  // Divisor m so that mse = bias^2 + sd^2 holds exactly.
  s.sd = std::sqrt(ss / static_cast<double>(m));
  s.bias = s.mean - truth;
  s.mse = se / static_cast<double>(m);
  return s;
}

ReplicationSummary run_experiment(const ExperimentSpec& spec) {
  if (spec.replications < 1) throw DomainError("an experiment needs at least one replication");
  if (spec.weight_grid.empty()) throw DomainError("an experiment needs at least one weight");
  if (spec.n == 0) throw DomainError("sample size must be positive");
  for (const auto& ws : spec.weight_grid) {
    // Validate the grammar up front; quantile locations need a sample.
    const std::vector<double> probe{1.0, 2.0};
    parse_weight(ws, probe);
  }

  FitOptions options;
  options.num_body = spec.fit_num_body;
  options.method = spec.method;
  options.theta_mode = spec.theta_mode;
  if (spec.theta_mode == ThetaMode::fixed) options.fixed_theta = spec.fixed_theta.value_or(spec.truth.tail_scale());
  options.tol = spec.tol;
  options.max_iter = spec.max_iter;
  options.accelerate = spec.accelerate;
  options.init_config = spec.init_config;

  const std::size_t grid = spec.weight_grid.size();
  const auto reps = static_cast<std::size_t>(spec.replications);
  std::vector<FitRecord> records(reps * grid);

  auto run_one = [&](std::size_t r) {
    const auto seed = replication_seed(spec.seed, r);
    const auto data = spec.contamination ? sample_contaminated(spec.truth, *spec.contamination, spec.n, seed)
                                         : sample(spec.truth, spec.n, seed);
    for (std::size_t k = 0; k < grid; ++k) {
      FitRecord& rec = records[r * grid + k];
      rec.replication = static_cast<int>(r);
      rec.weight_index = k;
      try {
        const auto w = parse_weight(spec.weight_grid[k], data);
        rec.weight = w.to_string();
        auto result = fit(data, w, options);
        rec.ok = true;
        rec.estimates = result.params.free_parameters();
        rec.objective = result.objective.value;
        rec.iterations = result.iterations;
        rec.converged = result.converged;
        for (std::size_t l = 1; l < result.trace.size(); ++l) {
          rec.worst_step = std::min(rec.worst_step, result.trace[l].objective - result.trace[l - 1].objective);
        }
        if (spec.keep_traces) rec.trace = std::move(result.trace);
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
      }
    }
  };

  const int threads = std::max(1, std::min<int>(spec.threads > 0 ? spec.threads : default_threads(),
                                                 static_cast<int>(reps)));
  if (threads == 1) {
    for (std::size_t r = 0; r < reps; ++r) run_one(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < reps; r = next++) run_one(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Reference layout for names and truth values.
  MixtureParams layout = spec.truth.with_theta_mode(spec.theta_mode);
  const bool same_layout = spec.fit_num_body == spec.truth.num_body();
  std::vector<std::string> names;
  std::vector<double> truth;
  if (same_layout) {
    names = layout.free_parameter_names();
    truth = layout.free_parameters();
  } else {
    std::vector<double> weights(spec.fit_num_body + 1, 1.0 / static_cast<double>(spec.fit_num_body + 1));
    const MixtureParams shape_only(weights, std::vector<double>(spec.fit_num_body, 1.0),
                                   std::vector<double>(spec.fit_num_body, 1.0), layout.tail_scale(),
                                   layout.tail_index(), spec.theta_mode);
    names = shape_only.free_parameter_names();
    truth.assign(names.size(), std::numeric_limits<double>::quiet_NaN());
    truth.back() = layout.tail_index();
    if (spec.theta_mode == ThetaMode::estimated) truth[truth.size() - 2] = layout.tail_scale();
  }

  ReplicationSummary summary;
  for (std::size_t k = 0; k < grid; ++k) {
    WeightSummary ws;
    ws.weight = spec.weight_grid[k];
    std::vector<std::vector<double>> columns(names.size());
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& rec = records[r * grid + k];
      ++ws.fits;
      if (!rec.ok) {
        ++ws.failures;
        continue;
      }
      if (!rec.converged) ++ws.not_converged;
      for (std::size_t p = 0; p < names.size(); ++p) columns[p].push_back(rec.estimates[p]);
    }
    for (std::size_t p = 0; p < names.size(); ++p) ws.parameters.push_back(summarize(names[p], truth[p], columns[p]));
    summary.weights.push_back(std::move(ws));
  }
  summary.records = std::move(records);
  return summary;
}

PotEstimate pot_oracle(std::span<const double> data, double threshold, double excess_scale) {
  if (!(excess_scale > 0.0)) throw DomainError("excess scale must be positive");
  double sum_log = 0.0;
  std::size_t m = 0;
  for (double y : data) {
    if (y >= threshold) {
      sum_log += std::log1p((y - threshold) / excess_scale);
      ++m;
    }
  }
  if (m < 10) throw DomainError("peaks-over-threshold fit needs at least 10 exceedances");
  if (!(sum_log > 0.0)) throw DomainError("all exceedances sit at the threshold");
  PotEstimate out;
  out.exceedances = m;
  const double md = static_cast<double>(m);
  out.index = md / sum_log;
  out.std_error = out.index / std::sqrt(md);
  out.objective = md * std::log(out.index / excess_scale) - (out.index + 1.0) * sum_log;
  return out;
}

}  // namespace mwle
