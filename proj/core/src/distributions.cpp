#include "mwle/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>

#include "mwle/error.hpp"
#include "mwle/scalar_optimize.hpp"
#include "mwle/special_functions.hpp"

namespace mwle {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be positive and finite");
  }
}

double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Per-component constants reused across many evaluations.
struct BodyConstants {
  double log_weight, mean, dispersion, shape, log_scale, log_norm, digamma_shape;
};

std::vector<BodyConstants> body_constants(const MixtureParams& p) {
  std::vector<BodyConstants> out;
  out.reserve(p.num_body());
  for (std::size_t j = 0; j < p.num_body(); ++j) {
    const double mu = p.body_means()[j];
    const double phi = p.body_dispersions()[j];
    const double shape = 1.0 / phi;
    const double log_scale = std::log(phi * mu);
    out.push_back({std::log(p.weight(j)), mu, phi, shape, log_scale,
                   -shape * log_scale - special::log_gamma(shape), special::digamma(shape)});
  }
  return out;
}

}  // namespace

MixtureParams::MixtureParams(std::vector<double> weights, std::vector<double> body_means,
                             std::vector<double> body_dispersions, double tail_scale,
                             double tail_index, ThetaMode theta_mode)
    : weights_(std::move(weights)),
      means_(std::move(body_means)),
      dispersions_(std::move(body_dispersions)),
      tail_scale_(tail_scale),
      tail_index_(tail_index),
      theta_mode_(theta_mode) {
  const std::size_t j_count = means_.size();
  if (dispersions_.size() != j_count || weights_.size() != j_count + 1) {
    throw DomainError("mixture parameters: inconsistent component counts");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("mixture weights must sum to one");
  // Rounding-level drift is left alone so that stored weights survive a
  // write/read round trip bit for bit.
  if (std::abs(total - 1.0) > 1e-14) {
    for (double& w : weights_) w /= total;
  }
  for (double m : means_) require_positive(m, "body mean");
  for (double d : dispersions_) require_positive(d, "body dispersion");
  require_positive(tail_scale_, "tail scale");
  require_positive(tail_index_, "tail index");

  std::vector<std::size_t> order(j_count);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return means_[a] < means_[b]; });
  std::vector<double> w(weights_), m(means_), d(dispersions_);
  for (std::size_t k = 0; k < j_count; ++k) {
    weights_[k] = w[order[k]];
    means_[k] = m[order[k]];
    dispersions_[k] = d[order[k]];
  }
}

MixtureParams MixtureParams::from_free(std::span<const double> free, std::size_t num_body,
                                       ThetaMode theta_mode, double fixed_tail_scale) {
  const std::size_t expected = 3 * num_body + (theta_mode == ThetaMode::estimated ? 2 : 1);
  if (free.size() != expected) throw DomainError("free parameter vector has the wrong length");
  std::vector<double> weights(free.begin(), free.begin() + num_body);
  const double body_total = std::accumulate(weights.begin(), weights.end(), 0.0);
  weights.push_back(1.0 - body_total);
  if (weights.back() < 0.0) {
    if (weights.back() > -1e-12) weights.back() = 0.0;
    else throw DomainError("body weights exceed one");
  }
  std::vector<double> means(free.begin() + num_body, free.begin() + 2 * num_body);
  std::vector<double> disp(free.begin() + 2 * num_body, free.begin() + 3 * num_body);
  double theta = fixed_tail_scale;
  std::size_t pos = 3 * num_body;
  if (theta_mode == ThetaMode::estimated) theta = free[pos++];
  return MixtureParams(std::move(weights), std::move(means), std::move(disp), theta, free[pos],
                       theta_mode);
}

std::size_t MixtureParams::num_free() const {
  return 3 * num_body() + (theta_estimated() ? 2 : 1);
}

std::vector<double> MixtureParams::free_parameters() const {
  std::vector<double> out;
  out.reserve(num_free());
  out.insert(out.end(), weights_.begin(), weights_.end() - 1);
  out.insert(out.end(), means_.begin(), means_.end());
  out.insert(out.end(), dispersions_.begin(), dispersions_.end());
  if (theta_estimated()) out.push_back(tail_scale_);
  out.push_back(tail_index_);
  return out;
}

std::vector<std::string> MixtureParams::free_parameter_names() const {
  std::vector<std::string> out;
  const auto indexed = [&](const char* stem) {
    for (std::size_t j = 0; j < num_body(); ++j) out.push_back(stem + std::to_string(j + 1));
  };
  indexed("pi");
  indexed("mu");
  indexed("phi");
  if (theta_estimated()) out.emplace_back("theta");
  out.emplace_back("gamma");
  return out;
}

MixtureParams MixtureParams::with_theta_mode(ThetaMode mode) const {
  MixtureParams copy = *this;
  copy.theta_mode_ = mode;
  return copy;
}

MixtureParams MixtureParams::with_tail_scale(double theta) const {
  require_positive(theta, "tail scale");
  MixtureParams copy = *this;
  copy.tail_scale_ = theta;
  return copy;
}

double gamma_log_pdf(double y, double mean, double dispersion) {
  const double shape = 1.0 / dispersion;
  if (y <= 0.0) {
    if (y < 0.0 || shape > 1.0) return kNegInf;
    if (shape < 1.0) return std::numeric_limits<double>::infinity();
    return -std::log(dispersion * mean);
  }
  const double log_scale = std::log(dispersion * mean);
  return -shape * log_scale - special::log_gamma(shape) + (shape - 1.0) * std::log(y) -
         y / (dispersion * mean);
}

double gamma_cdf(double y, double mean, double dispersion) {
  if (y <= 0.0) return 0.0;
  return special::gamma_p(1.0 / dispersion, y / (dispersion * mean));
}

double gamma_sf(double y, double mean, double dispersion) {
  if (y <= 0.0) return 1.0;
  return special::gamma_q(1.0 / dispersion, y / (dispersion * mean));
}

double lomax_log_pdf(double y, double scale, double index) {
  if (y < 0.0) return kNegInf;
  return std::log(index) + index * std::log(scale) - (index + 1.0) * std::log(y + scale);
}

double lomax_sf(double y, double scale, double index) {
  if (y <= 0.0) return 1.0;
  return std::exp(-index * std::log1p(y / scale));
}

double lomax_cdf(double y, double scale, double index) {
  if (y <= 0.0) return 0.0;
  return -std::expm1(-index * std::log1p(y / scale));
}

void component_log_pdfs(double y, const MixtureParams& p, std::span<double> out) {
  const std::size_t j_count = p.num_body();
  if (out.size() != j_count + 1) throw DomainError("component_log_pdfs: output size mismatch");
  for (std::size_t j = 0; j < j_count; ++j) {
    out[j] = gamma_log_pdf(y, p.body_means()[j], p.body_dispersions()[j]);
  }
  out[j_count] = lomax_log_pdf(y, p.tail_scale(), p.tail_index());
}

double mixture_log_pdf(double y, const MixtureParams& p) {
  std::vector<double> terms(p.num_body() + 1);
  component_log_pdfs(y, p, terms);
  for (std::size_t j = 0; j < terms.size(); ++j) {
    terms[j] = p.weights()[j] > 0.0 ? terms[j] + std::log(p.weights()[j]) : kNegInf;
  }
  return log_sum_exp(terms);
}

void mixture_log_pdfs(std::span<const double> data, const MixtureParams& p, std::span<double> out) {
  if (out.size() != data.size()) throw DomainError("mixture_log_pdfs: output size mismatch");
  const auto body = body_constants(p);
  const std::size_t j_count = p.num_body();
  const double gamma = p.tail_index();
  const double tail_const = std::log(p.tail_weight()) + std::log(gamma) + gamma * std::log(p.tail_scale());
  std::vector<double> terms(j_count + 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double y = data[i];
    if (!(y > 0.0)) throw DomainError("mixture density requires positive observations");
    const double log_y = std::log(y);
    for (std::size_t j = 0; j < j_count; ++j) {
      const auto& b = body[j];
      terms[j] = b.log_weight + b.log_norm + (b.shape - 1.0) * log_y - y / (b.dispersion * b.mean);
    }
    terms[j_count] = tail_const - (gamma + 1.0) * std::log(y + p.tail_scale());
    out[i] = log_sum_exp(terms);
  }
}

double mixture_pdf(double y, const MixtureParams& p) { return std::exp(mixture_log_pdf(y, p)); }

double mixture_cdf(double y, const MixtureParams& p) {
  double total = 0.0;
  for (std::size_t j = 0; j < p.num_body(); ++j) {
    total += p.weight(j) * gamma_cdf(y, p.body_means()[j], p.body_dispersions()[j]);
  }
  return total + p.tail_weight() * lomax_cdf(y, p.tail_scale(), p.tail_index());
}

double mixture_sf(double y, const MixtureParams& p) {
  double total = 0.0;
  for (std::size_t j = 0; j < p.num_body(); ++j) {
    total += p.weight(j) * gamma_sf(y, p.body_means()[j], p.body_dispersions()[j]);
  }
  return total + p.tail_weight() * lomax_sf(y, p.tail_scale(), p.tail_index());
}

double mixture_quantile(double q, const MixtureParams& p) {
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  if (q == 0.0) return 0.0;
  if (q == 1.0) return std::numeric_limits<double>::infinity();
  // Work on whichever side of the distribution keeps the residual accurate.
  const bool upper = q > 0.5;
  auto residual = [&](double y) {
    return upper ? (1.0 - q) - mixture_sf(y, p) : mixture_cdf(y, p) - q;
  };
  double hi = p.tail_scale();
  for (double m : p.body_means()) hi = std::max(hi, m);
  int doublings = 0;
  while (residual(hi) < 0.0) {
    hi *= 2.0;
    if (++doublings > 2000 || !std::isfinite(hi)) throw NumericalError("quantile bracket failed");
  }
  return opt::brent_root(residual, 0.0, hi, 0.0);
}

std::vector<double> mixture_scores(std::span<const double> data, const MixtureParams& p,
                                   std::span<double> log_density) {
  const std::size_t j_count = p.num_body();
  const std::size_t dim = p.num_free();
  if (!log_density.empty() && log_density.size() != data.size()) {
    throw DomainError("mixture_scores: log_density size mismatch");
  }
  const auto body = body_constants(p);
  const double theta = p.tail_scale();
  const double gamma = p.tail_index();
  const double log_tail_weight = std::log(p.tail_weight());
  const double tail_const = std::log(gamma) + gamma * std::log(theta);
  const bool est_theta = p.theta_estimated();

  std::vector<double> out(data.size() * dim, 0.0);
  std::vector<double> log_f(j_count + 1), log_term(j_count + 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double y = data[i];
    if (!(y > 0.0)) throw DomainError("scores require positive observations");
    const double log_y = std::log(y);
    for (std::size_t j = 0; j < j_count; ++j) {
      const auto& b = body[j];
      log_f[j] = b.log_norm + (b.shape - 1.0) * log_y - y / (b.dispersion * b.mean);
      log_term[j] = b.log_weight + log_f[j];
    }
    const double log_y_theta = std::log(y + theta);
    log_f[j_count] = tail_const - (gamma + 1.0) * log_y_theta;
    log_term[j_count] = log_tail_weight + log_f[j_count];
    const double log_h = log_sum_exp(log_term);
    if (!log_density.empty()) log_density[i] = log_h;

    double* s = out.data() + i * dim;
    const double tail_ratio = std::exp(log_f[j_count] - log_h);
    for (std::size_t j = 0; j < j_count; ++j) {
      const auto& b = body[j];
      const double resp = std::exp(log_term[j] - log_h);
      s[j] = std::exp(log_f[j] - log_h) - tail_ratio;
      s[j_count + j] = resp * (y - b.mean) / (b.dispersion * b.mean * b.mean);
      s[2 * j_count + j] = resp *
                           (b.log_scale - 1.0 + b.digamma_shape - log_y + y / b.mean) /
                           (b.dispersion * b.dispersion);
    }
    const double tail_resp = std::exp(log_term[j_count] - log_h);
    std::size_t pos = 3 * j_count;
    if (est_theta) s[pos++] = tail_resp * (gamma / theta - (gamma + 1.0) / (y + theta));
    s[pos] = tail_resp * (1.0 / gamma + std::log(theta) - log_y_theta);
  }
  return out;
}

std::vector<double> mixture_score(double y, const MixtureParams& p) {
  const double point[1] = {y};
  return mixture_scores(point, p);
}

double Rng::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gamma(double shape) {
  require_positive(shape, "gamma shape");
  if (shape < 1.0) {
    // Boost the shape by one and correct with a power of a uniform.
    const double g = gamma(shape + 1.0);
    return g * std::exp(std::log(uniform()) / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    const double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

double sample_gamma(Rng& rng, double mean, double dispersion) {
  return rng.gamma(1.0 / dispersion) * dispersion * mean;
}

double sample_lomax(Rng& rng, double scale, double index) {
  return scale * std::expm1(-std::log(rng.uniform()) / index);
}

std::vector<double> sample(const MixtureParams& p, std::size_t n, Rng& rng) {
  std::vector<double> cumulative(p.weights().size());
  std::partial_sum(p.weights().begin(), p.weights().end(), cumulative.begin());
  std::vector<double> out;
  out.reserve(n);
  const std::size_t j_count = p.num_body();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t k = std::min<std::size_t>(it - cumulative.begin(), j_count);
    out.push_back(k < j_count ? sample_gamma(rng, p.body_means()[k], p.body_dispersions()[k])
                              : sample_lomax(rng, p.tail_scale(), p.tail_index()));
  }
  return out;
}

std::vector<double> sample(const MixtureParams& p, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample(p, n, rng);
}

}  // namespace mwle
