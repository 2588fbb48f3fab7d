#include "mwle/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mwle/error.hpp"
#include "mwle/likelihood.hpp"
#include "mwle/special_functions.hpp"

namespace mwle {

CriteriaReport criteria(double objective, const MixtureParams& params, const std::optional<SandwichPair>& sandwich,
                        std::span<const double> data, const WeightConfig& w) {
  const auto s = prepare_sample(data, w);
  CriteriaReport r;
  r.objective = objective;
  r.num_params = params.num_free();
  r.n = s.size();
  r.effective_n = s.sum_weight;
  const double p = static_cast<double>(r.num_params);
  r.taic = -2.0 * objective + 2.0 * p;
  r.tbic = -2.0 * objective + std::log(r.effective_n) * p;
  if (sandwich) {
    try {
      const auto diag = effective_parameter_diagonal(*sandwich);
      r.effective_parameter_diagonal.assign(diag.data(), diag.data() + diag.size());
      const double trace = diag.sum();
      r.effective_parameters = trace;
      r.raic = -2.0 * objective + 2.0 * trace;
      r.rbic = -2.0 * objective + std::log(static_cast<double>(r.n)) * trace;
      r.negative_effective_parameter = (diag.array() < 0.0).any();
      if (r.negative_effective_parameter) r.note = "some effective-parameter entries are negative";
    } catch (const SingularMatrixError& e) {
      r.note = e.what();
    }
  } else {
    r.note = "sandwich unavailable; RAIC and RBIC omitted";
  }
  return r;
}

CriteriaReport criteria(const FitResult& fit, const std::optional<SandwichPair>& sandwich,
                        std::span<const double> data, const WeightConfig& w) {
  return criteria(fit.objective.value, fit.params, sandwich, data, w);
}

Criterion parse_criterion(const std::string& text) {
  if (text == "raic") return Criterion::raic;
  if (text == "rbic") return Criterion::rbic;
  if (text == "taic") return Criterion::taic;
  if (text == "tbic") return Criterion::tbic;
  throw DomainError("unknown criterion '" + text + "' (expected raic, rbic, taic or tbic)");
}

std::string to_string(Criterion c) {
  switch (c) {
    case Criterion::raic: return "raic";
    case Criterion::rbic: return "rbic";
    case Criterion::taic: return "taic";
    case Criterion::tbic: return "tbic";
  }
  return "";
}

std::optional<double> criterion_value(const CriteriaReport& r, Criterion c) {
  switch (c) {
    case Criterion::raic: return r.raic;
    case Criterion::rbic: return r.rbic;
    case Criterion::taic: return r.taic;
    case Criterion::tbic: return r.tbic;
  }
  return std::nullopt;
}

ScanResult scan_components(std::span<const double> data, const WeightConfig& w, std::size_t j_min,
                           std::size_t j_max, const FitOptions& base, Criterion criterion) {
  if (j_min > j_max) throw DomainError("component range is empty");
  ScanResult out;
  for (std::size_t j = j_min; j <= j_max; ++j) {
    ScanEntry entry;
    entry.num_body = j;
    FitOptions options = base;
    options.num_body = j;
    options.init.reset();
    try {
      auto fit_result = fit(data, w, options);
      std::optional<SandwichPair> sw;
      try {
        sw = sandwich(data, fit_result.params, w);
      } catch (const NumericalError&) {
      }
      entry.report = criteria(fit_result, sw, data, w);
      entry.fit = std::move(fit_result);
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
    out.entries.push_back(std::move(entry));
  }
  auto argmin = [&](Criterion c) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    double best_value = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < out.entries.size(); ++k) {
      if (!out.entries[k].report) continue;
      const auto v = criterion_value(*out.entries[k].report, c);
      if (v && *v < best_value) {
        best_value = *v;
        best = k;
      }
    }
    return best;
  };
  out.best_raic = argmin(Criterion::raic);
  out.best_rbic = argmin(Criterion::rbic);
  out.best_taic = argmin(Criterion::taic);
  out.best_tbic = argmin(Criterion::tbic);
  out.selected = argmin(criterion);
  return out;
}

double partial_expectation(const MixtureParams& params, double v) {
  if (!(v >= 0.0)) throw DomainError("partial expectation threshold must be non-negative");
  double total = 0.0;
  for (std::size_t j = 0; j < params.num_body(); ++j) {
    const double mean = params.body_means()[j];
    const double phi = params.body_dispersions()[j];
    const double shape = 1.0 / phi;
    // int_v^inf u f(u) du = mean * Q(shape + 1, rate v).
    total += params.weight(j) * mean * special::gamma_q(shape + 1.0, v / (phi * mean));
  }
  if (params.tail_weight() > 0.0) {
    const double gamma = params.tail_index();
    if (gamma <= 1.0) return std::numeric_limits<double>::infinity();
    const double theta = params.tail_scale();
    const double survival = lomax_sf(v, theta, gamma);
    total += params.tail_weight() * survival * ((theta + v) / (gamma - 1.0) + v);
  }
  return total;
}

RiskMeasures var_cte(const MixtureParams& params, double q) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("security level must lie in (0, 1)");
  RiskMeasures r;
  r.var = mixture_quantile(q, params);
  if (params.tail_weight() > 0.0 && params.tail_index() <= 1.0) return r;
  r.cte = partial_expectation(params, r.var) / (1.0 - q);
  return r;
}

EmpiricalRisk empirical_var_cte(std::span<const double> data, double q) {
  if (data.empty()) throw DomainError("empirical risk measures need data");
  if (!(q > 0.0 && q < 1.0)) throw DomainError("security level must lie in (0, 1)");
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double pos = std::ceil(static_cast<double>(n) * q - 1e-9);
  const std::size_t k = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::max(0.0, pos)));
  EmpiricalRisk r;
  r.var = sorted[k];
  double sum = 0.0;
  for (std::size_t i = k; i < n; ++i) sum += sorted[i];
  r.exceedances = n - k;
  r.cte = sum / static_cast<double>(r.exceedances);
  r.few_exceedances = r.exceedances < 5;
  return r;
}

}  // namespace mwle
