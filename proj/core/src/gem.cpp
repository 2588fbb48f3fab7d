#include "mwle/gem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mwle/error.hpp"
#include "mwle/scalar_optimize.hpp"
#include "mwle/special_functions.hpp"

namespace mwle {
namespace {

constexpr double kCollapse = 1e-300;

// log pi_j + log f_j(y_i) - log c_j for every observation and component,
// where c_j are optional per-component divisors (the I_j of Method 2).
Eigen::MatrixXd log_component_terms(const WeightedSample& s, std::span<const double> log_weights,
                                    const MixtureParams& p) {
  const std::size_t n = s.size();
  const std::size_t j_count = p.num_body();
  Eigen::MatrixXd out(n, j_count + 1);
  for (std::size_t j = 0; j < j_count; ++j) {
    const double mu = p.body_means()[j];
    const double phi = p.body_dispersions()[j];
    const double shape = 1.0 / phi;
    const double c = log_weights[j] - shape * std::log(phi * mu) - special::log_gamma(shape);
    const double rate = 1.0 / (phi * mu);
    for (std::size_t i = 0; i < n; ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          c + (shape - 1.0) * s.log_y[i] - rate * s.y[i];
    }
  }
  const double theta = p.tail_scale();
  const double gamma = p.tail_index();
  const double c = log_weights[j_count] + std::log(gamma) + gamma * std::log(theta);
  for (std::size_t i = 0; i < n; ++i) {
    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j_count)) =
        c - (gamma + 1.0) * std::log(s.y[i] + theta);
  }
  return out;
}

// Turns log terms into row-stochastic responsibilities in place.
void normalize_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double mx = m.row(i).maxCoeff();
    if (!std::isfinite(mx)) throw NumericalError("observation " + std::to_string(i) + " has zero mixture density");
    m.row(i) = (m.row(i).array() - mx).exp();
    m.row(i) /= m.row(i).sum();
  }
}

std::vector<double> safe_logs(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) {
    out[j] = v[j] > 0.0 ? std::log(v[j]) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

// Sufficient statistics of a weighted responsibility column.
struct ColumnStats {
  double count = 0.0;    // sum W z
  double sum_y = 0.0;    // sum W z y
  double sum_log = 0.0;  // sum W z log y
};

ColumnStats column_stats(const WeightedSample& s, const Eigen::MatrixXd& z, Eigen::Index col) {
  AccurateSum c, sy, sl;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double wz = s.weight[i] * z(static_cast<Eigen::Index>(i), col);
    if (wz == 0.0) continue;
    c.add(wz);
    sy.add(wz * s.y[i]);
    sl.add(wz * s.log_y[i]);
  }
  return {c.value(), sy.value(), sl.value()};
}

double weighted_log_shift(const WeightedSample& s, const Eigen::MatrixXd& z, Eigen::Index col, double theta) {
  AccurateSum acc;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double wz = s.weight[i] * z(static_cast<Eigen::Index>(i), col);
    if (wz != 0.0) acc.add(wz * std::log(s.y[i] + theta));
  }
  return acc.value();
}

void check_collapse(double count, std::size_t j, std::size_t j_count) {
  if (!(count >= kCollapse)) {
    const std::string which = j < j_count ? "body component " + std::to_string(j + 1) : std::string("tail component");
    throw ComponentCollapseError(which +
                                 " lost all effective weight; try fewer components or a different weight function");
  }
}

// Solves log(a) - digamma(a) = r for the gamma shape a (r > 0).
double solve_gamma_shape(double r, double fallback) {
  if (!(r > 0.0) || !std::isfinite(r)) return fallback;
  constexpr double lo = 1e-10, hi = 1e12;
  auto f = [&](double t) {
    const double a = std::exp(t);
    return std::log(a) - special::digamma(a) - r;
  };
  const double t_lo = std::log(lo), t_hi = std::log(hi);
  if (f(t_hi) >= 0.0) return hi;
  if (f(t_lo) <= 0.0) return lo;
  return std::exp(opt::brent_root(f, t_lo, t_hi, 1e-14));
}

double gamma_q_term(double count, double sum_log, double sum_y, double mean, double dispersion) {
  const double shape = 1.0 / dispersion;
  return count * (-shape * std::log(dispersion * mean) - special::log_gamma(shape)) + (shape - 1.0) * sum_log -
         sum_y / (dispersion * mean);
}

}  // namespace

std::string to_string(GemMethod m) { return m == GemMethod::hypothetical ? "M1" : "M2"; }

GemMethod parse_method(const std::string& text) {
  if (text == "M1" || text == "m1" || text == "1" || text == "hypothetical") return GemMethod::hypothetical;
  if (text == "M2" || text == "m2" || text == "2" || text == "transformed") return GemMethod::transformed;
  throw DomainError("unknown GEM method '" + text + "' (expected M1 or M2)");
}

EStepHypothetical estep_m1(const WeightedSample& s, const MixtureParams& p, const WeightConfig& w) {
  const std::size_t j_count = p.num_body();
  EStepHypothetical e;
  e.z = log_component_terms(s, safe_logs(p.weights()), p);
  normalize_rows(e.z);
  e.z_prime.assign(p.weights().begin(), p.weights().end());
  e.y_hat.assign(p.body_means().begin(), p.body_means().end());
  e.log_y_hat.resize(j_count);
  for (std::size_t j = 0; j < j_count; ++j) {
    const double phi = p.body_dispersions()[j];
    e.log_y_hat[j] = special::digamma(1.0 / phi) + std::log(phi * p.body_means()[j]);
  }
  const double theta = p.tail_scale();
  e.log_y_theta_hat = std::log(theta) + 1.0 / p.tail_index();
  if (w.is_unit()) return e;

  std::vector<double> mass(j_count + 1);
  double observed = 0.0, missing = 0.0;
  for (std::size_t j = 0; j < j_count; ++j) {
    const GammaComponent c{p.body_means()[j], p.body_dispersions()[j]};
    mass[j] = component_weighted_integral(w, c, Moment::one, Side::complement);
    observed += p.weight(j) * component_weighted_integral(w, c, Moment::one, Side::weighted);
    missing += p.weight(j) * mass[j];
    if (mass[j] > 0.0) {
      e.y_hat[j] = component_weighted_integral(w, c, Moment::value, Side::complement) / mass[j];
      e.log_y_hat[j] = component_weighted_integral(w, c, Moment::log_value, Side::complement) / mass[j];
    }
  }
  const LomaxComponent tail{theta, p.tail_index()};
  mass[j_count] = component_weighted_integral(w, tail, Moment::one, Side::complement);
  observed += p.tail_weight() * component_weighted_integral(w, tail, Moment::one, Side::weighted);
  missing += p.tail_weight() * mass[j_count];
  if (mass[j_count] > 0.0) {
    e.log_y_theta_hat = component_weighted_integral(w, tail, Moment::log_shifted, Side::complement) / mass[j_count];
  }
  if (!(observed > 0.0)) throw NumericalError("weighted mass of the model is zero");
  if (missing > 0.0) {
    e.k = missing / observed;
    for (std::size_t j = 0; j <= j_count; ++j) e.z_prime[j] = p.weights()[j] * mass[j] / missing;
  }
  return e;
}

double q_function_m1(const WeightedSample& s, const EStepHypothetical& e, const MixtureParams& params) {
  const std::size_t j_count = params.num_body();
  const double extra = s.sum_weight * e.k;
  double q = 0.0;
  for (std::size_t j = 0; j <= j_count; ++j) {
    const auto st = column_stats(s, e.z, static_cast<Eigen::Index>(j));
    const double count = st.count + extra * e.z_prime[j];
    const double pi = params.weights()[j];
    if (count > 0.0) q += count * std::log(pi);
    if (j < j_count) {
      const double sum_y = st.sum_y + extra * e.z_prime[j] * e.y_hat[j];
      const double sum_log = st.sum_log + extra * e.z_prime[j] * e.log_y_hat[j];
      q += gamma_q_term(count, sum_log, sum_y, params.body_means()[j], params.body_dispersions()[j]);
    } else {
      const double theta = params.tail_scale();
      const double gamma = params.tail_index();
      const double shift = weighted_log_shift(s, e.z, static_cast<Eigen::Index>(j), theta) +
                           extra * e.z_prime[j] * e.log_y_theta_hat;
      q += count * (std::log(gamma) + gamma * std::log(theta)) - (gamma + 1.0) * shift;
    }
  }
  return q;
}

MixtureParams mstep_m1(const WeightedSample& s, const EStepHypothetical& e, const WeightConfig& w,
                       const MixtureParams& current) {
  const std::size_t j_count = current.num_body();
  const double extra = s.sum_weight * e.k;
  std::vector<double> counts(j_count + 1), means(j_count), disps(j_count);
  for (std::size_t j = 0; j < j_count; ++j) {
    const auto st = column_stats(s, e.z, static_cast<Eigen::Index>(j));
    const double add = extra * e.z_prime[j];
    counts[j] = st.count + add;
    check_collapse(counts[j], j, j_count);
    const double sum_y = st.sum_y + add * e.y_hat[j];
    const double sum_log = st.sum_log + add * e.log_y_hat[j];
    means[j] = sum_y / counts[j];
    // Stationarity in the shape: log a - digamma(a) = log(mean) - mean log.
    const double r = std::log(means[j]) - sum_log / counts[j];
    disps[j] = 1.0 / solve_gamma_shape(r, 1.0 / current.body_dispersions()[j]);
  }
  const double theta = current.tail_scale();
  const auto tail_col = static_cast<Eigen::Index>(j_count);
  const double tail_count = column_stats(s, e.z, tail_col).count + extra * e.z_prime[j_count];
  check_collapse(tail_count, j_count, j_count);
  counts[j_count] = tail_count;
  const double log_theta = std::log(theta);
  AccurateSum excess;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double wz = s.weight[i] * e.z(static_cast<Eigen::Index>(i), tail_col);
    if (wz != 0.0) excess.add(wz * std::log1p(s.y[i] / theta));
  }
  excess.add(extra * e.z_prime[j_count] * (e.log_y_theta_hat - log_theta));
  const double gamma = tail_count / excess.value();
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw NumericalError("tail index update is not finite");

  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  for (double& c : counts) c /= total;
  MixtureParams next(counts, means, disps, theta, gamma, current.theta_mode());

  if (current.theta_estimated()) {
    // The tail scale has no closed-form update; maximize the observed
    // objective directly with everything else held at the new values.
    const auto sample = s;
    auto objective = [&](double th) {
      try {
        return weighted_loglik_value(sample, next.with_tail_scale(th), w);
      } catch (const std::exception&) {
        return -std::numeric_limits<double>::infinity();
      }
    };
    const auto best = opt::maximize_positive(objective, theta);
    next = next.with_tail_scale(best.x);
  }
  return next;
}

std::vector<double> pi_forward(std::span<const double> pi, std::span<const double> component_integrals) {
  if (pi.size() != component_integrals.size()) throw DomainError("pi_forward: size mismatch");
  std::vector<double> out(pi.size());
  double total = 0.0;
  for (std::size_t j = 0; j < pi.size(); ++j) {
    out[j] = pi[j] * component_integrals[j];
    total += out[j];
  }
  if (!(total > 0.0)) throw NumericalError("pi_forward: zero weighted mass");
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> pi_backtransform(std::span<const double> pi_star, std::span<const double> component_integrals) {
  if (pi_star.size() != component_integrals.size()) throw DomainError("pi_backtransform: size mismatch");
  std::vector<double> out(pi_star.size());
  double total = 0.0;
  for (std::size_t j = 0; j < pi_star.size(); ++j) {
    if (!(component_integrals[j] > 0.0)) {
      throw NumericalError("pi_backtransform: component " + std::to_string(j + 1) + " has zero weighted mass");
    }
    out[j] = pi_star[j] / component_integrals[j];
    total += out[j];
  }
  if (!std::isfinite(total)) throw NumericalError("pi_backtransform: weighted mass too small to invert");
  for (double& v : out) v /= total;
  return out;
}

EStepTransformed estep_m2(const WeightedSample& s, std::span<const double> pi_star, const MixtureParams& p,
                          const WeightConfig& w) {
  if (pi_star.size() != p.num_body() + 1) throw DomainError("estep_m2: transformed weights have the wrong length");
  const auto integrals = component_normalizers(w, p);
  auto logs = safe_logs(pi_star);
  for (std::size_t j = 0; j < logs.size(); ++j) logs[j] -= std::log(integrals[j]);
  EStepTransformed e;
  e.z_star = log_component_terms(s, logs, p);
  normalize_rows(e.z_star);
  return e;
}

double q_function_m2(const WeightedSample& s, const EStepTransformed& e, std::span<const double> pi_star,
                     const MixtureParams& p, const WeightConfig& w) {
  const auto integrals = component_normalizers(w, p);
  auto logs = safe_logs(pi_star);
  for (std::size_t j = 0; j < logs.size(); ++j) logs[j] -= std::log(integrals[j]);
  const auto terms = log_component_terms(s, logs, p);
  AccurateSum q;
  for (Eigen::Index i = 0; i < terms.rows(); ++i) {
    const double wi = s.weight[static_cast<std::size_t>(i)];
    if (wi == 0.0) continue;
    for (Eigen::Index j = 0; j < terms.cols(); ++j) {
      const double z = e.z_star(i, j);
      if (z > 0.0) q.add(wi * z * terms(i, j));
    }
  }
  return q.value();
}

TransformedParams mstep_m2(const WeightedSample& s, const EStepTransformed& e, const WeightConfig& w,
                           const MixtureParams& current) {
  const std::size_t j_count = current.num_body();
  std::vector<double> pi_star(j_count + 1);
  std::vector<double> means(current.body_means().begin(), current.body_means().end());
  std::vector<double> disps(current.body_dispersions().begin(), current.body_dispersions().end());
  const auto unit = w.is_unit();

  for (std::size_t j = 0; j < j_count; ++j) {
    const auto st = column_stats(s, e.z_star, static_cast<Eigen::Index>(j));
    check_collapse(st.count, j, j_count);
    pi_star[j] = st.count / s.sum_weight;
    auto q = [&](double mean, double disp) {
      double value = gamma_q_term(st.count, st.sum_log, st.sum_y, mean, disp);
      if (!unit) {
        value -= st.count * std::log(component_weighted_integral(w, GammaComponent{mean, disp}, Moment::one));
      }
      return value;
    };
    auto q_safe = [&](double mean, double disp) {
      try {
        return q(mean, disp);
      } catch (const std::exception&) {
        return -std::numeric_limits<double>::infinity();
      }
    };
    means[j] = opt::maximize_positive([&](double m) { return q_safe(m, disps[j]); }, means[j]).x;
    disps[j] = opt::maximize_positive([&](double d) { return q_safe(means[j], d); }, disps[j]).x;
  }

  const auto tail_col = static_cast<Eigen::Index>(j_count);
  const auto tail_stats = column_stats(s, e.z_star, tail_col);
  check_collapse(tail_stats.count, j_count, j_count);
  pi_star[j_count] = tail_stats.count / s.sum_weight;
  double theta = current.tail_scale();
  double gamma = current.tail_index();
  const double count = tail_stats.count;
  auto tail_q = [&](double th, double g, double shift) {
    double value = count * (std::log(g) + g * std::log(th)) - (g + 1.0) * shift;
    if (!unit) value -= count * std::log(component_weighted_integral(w, LomaxComponent{th, g}, Moment::one));
    return value;
  };
  auto tail_q_safe = [&](double th, double g, double shift) {
    try {
      return tail_q(th, g, shift);
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  if (current.theta_estimated()) {
    theta = opt::maximize_positive(
                [&](double th) { return tail_q_safe(th, gamma, weighted_log_shift(s, e.z_star, tail_col, th)); },
                theta)
                .x;
  }
  const double shift = weighted_log_shift(s, e.z_star, tail_col, theta);
  gamma = opt::maximize_positive([&](double g) { return tail_q_safe(theta, g, shift); }, gamma).x;

  // Normalise pi* exactly, then recover the original weights at the new
  // component parameters.
  const double total = std::accumulate(pi_star.begin(), pi_star.end(), 0.0);
  for (double& v : pi_star) v /= total;
  const MixtureParams provisional(pi_star, means, disps, theta, gamma, current.theta_mode());
  // Construction may reorder body components; keep pi* aligned with them.
  std::vector<double> aligned_star(provisional.weights().begin(), provisional.weights().end());
  const auto integrals = component_normalizers(w, provisional);
  const auto pi = pi_backtransform(aligned_star, integrals);
  MixtureParams params(pi, std::vector<double>(provisional.body_means().begin(), provisional.body_means().end()),
                       std::vector<double>(provisional.body_dispersions().begin(), provisional.body_dispersions().end()),
                       theta, gamma, current.theta_mode());
  return {std::move(params), std::move(aligned_star)};
}

double relative_change(const MixtureParams& previous, const MixtureParams& current) {
  const auto a = previous.free_parameters();
  const auto b = current.free_parameters();
  if (a.size() != b.size()) throw DomainError("relative_change: parameter layouts differ");
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) total += std::abs(std::log(b[k] / a[k]));
  return total / static_cast<double>(a.size());
}

namespace detail {

MixtureParams extrapolate(const MixtureParams& previous2, const MixtureParams& current, double step) {
  const auto lerp = [&](double old_v, double new_v) {
    if (!(old_v > 0.0) || !(new_v > 0.0)) throw DomainError("cannot extrapolate a zero parameter");
    return std::exp(std::log(new_v) + step * (std::log(new_v) - std::log(old_v)));
  };
  const std::size_t j_count = current.num_body();
  if (previous2.num_body() != j_count) throw DomainError("extrapolate: component counts differ");
  std::vector<double> weights(j_count + 1), means(j_count), disps(j_count);
  double total = 0.0;
  for (std::size_t j = 0; j <= j_count; ++j) {
    weights[j] = lerp(previous2.weights()[j], current.weights()[j]);
    total += weights[j];
  }
  for (double& v : weights) v /= total;
  for (std::size_t j = 0; j < j_count; ++j) {
    means[j] = lerp(previous2.body_means()[j], current.body_means()[j]);
    disps[j] = lerp(previous2.body_dispersions()[j], current.body_dispersions()[j]);
  }
  const double theta = current.theta_estimated() ? lerp(previous2.tail_scale(), current.tail_scale())
                                                 : current.tail_scale();
  const double gamma = lerp(previous2.tail_index(), current.tail_index());
  for (double v : means) if (!std::isfinite(v)) throw DomainError("extrapolation overflow");
  for (double v : disps) if (!std::isfinite(v)) throw DomainError("extrapolation overflow");
  if (!std::isfinite(theta) || !std::isfinite(gamma)) throw DomainError("extrapolation overflow");
  return MixtureParams(weights, means, disps, theta, gamma, current.theta_mode());
}

}  // namespace detail

namespace {

FitResult run_gem(std::span<const double> data, const WeightedSample& s, const WeightConfig& w,
                  const FitOptions& options, MixtureParams params, std::vector<std::string> warnings) {
  FitResult result{params, {}, 0, false, options.method, {}, {}, {}, {}, std::move(warnings)};
  params = params.with_theta_mode(options.theta_mode);
  if (options.fixed_theta) params = params.with_tail_scale(*options.fixed_theta);
  if (data.size() < params.num_free()) throw DomainError("fewer observations than free parameters");
  if (!(s.sum_weight > 0.0)) throw DomainError("all observations have zero weight");

  auto objective = [&](const MixtureParams& p) { return weighted_loglik_value(s, p, w); };
  double current_value = objective(params);
  result.trace.push_back({0, current_value, std::numeric_limits<double>::quiet_NaN()});

  std::vector<MixtureParams> history{params};
  std::vector<double> last_pi_star;
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    MixtureParams next = params;
    double next_value;
    try {
      if (options.method == GemMethod::hypothetical) {
        const auto e = estep_m1(s, params, w);
        next = mstep_m1(s, e, w, params);
      } else {
        const auto pi_star = pi_forward(params.weights(), component_normalizers(w, params));
        const auto e = estep_m2(s, pi_star, params, w);
        auto step = mstep_m2(s, e, w, params);
        next = std::move(step.params);
      }
      next_value = objective(next);
    } catch (const NumericalError& ex) {
      throw FitAborted(std::string("numerical failure at iteration ") + std::to_string(iter) + ": " + ex.what(),
                       result.trace);
    }
    if (options.accelerate && iter % 2 == 0 && history.size() >= 2) {
      const auto& previous2 = history[history.size() - 2];
      auto acc = accelerate(previous2, next, next_value, [&](const MixtureParams& p) { return objective(p); });
      if (acc.accepted) {
        next = std::move(acc.params);
        next_value = acc.objective;
      }
    }
    const double delta = relative_change(params, next);
    result.trace.push_back({iter, next_value, delta});
    params = std::move(next);
    current_value = next_value;
    history.push_back(params);
    if (history.size() > 3) history.erase(history.begin());
    result.iterations = iter;
    if (delta < options.tol) {
      result.converged = true;
      break;
    }
  }
  result.params = params;
  result.objective = weighted_loglik(data, params, w);
  if (options.method == GemMethod::transformed) {
    result.pi_star = pi_forward(params.weights(), component_normalizers(w, params));
  }
  return result;
}

}  // namespace

FitResult fit(std::span<const double> data, const WeightConfig& w, const FitOptions& options) {
  const auto s = prepare_sample(data, w);
  if (options.init) {
    if (options.init->num_body() != options.num_body) {
      throw DomainError("initial parameters have a different number of body components");
    }
    return run_gem(data, s, w, options, *options.init, {});
  }

  auto first = cmm_init(data, options.num_body, options.init_config);
  std::vector<double> thresholds{first.threshold};
  FitResult best = run_gem(data, s, w, options, first.params, std::move(first.warnings));
  if (options.num_body == 0) return best;

  for (double level : options.init_config.extra_start_levels) {
    InitConfig config = options.init_config;
    config.threshold = InitConfig::Threshold::quantile;
    config.threshold_level = level;
    std::optional<FitResult> candidate;
    try {
      auto init = cmm_init(data, options.num_body, config);
      if (std::find(thresholds.begin(), thresholds.end(), init.threshold) != thresholds.end()) continue;
      thresholds.push_back(init.threshold);
      candidate = run_gem(data, s, w, options, init.params, std::move(init.warnings));
    } catch (const std::exception&) {
      // The primary start already produced a fit; a failed alternative is skipped.
      continue;
    }
    if (candidate->objective.value > best.objective.value) best = std::move(*candidate);
  }
  return best;
}

}  // namespace mwle
