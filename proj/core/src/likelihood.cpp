#include "mwle/likelihood.hpp"

#include <cmath>
#include <sstream>

#include "mwle/error.hpp"
#include "mwle/special_functions.hpp"

namespace mwle {

void AccurateSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

WeightedSample prepare_sample(std::span<const double> data, const WeightConfig& w) {
  WeightedSample s;
  s.y.assign(data.begin(), data.end());
  s.log_y.reserve(data.size());
  s.weight.reserve(data.size());
  AccurateSum sw, swlw;
  std::size_t rejected = 0;
  for (double y : data) {
    if (!(y > 0.0) || !std::isfinite(y)) ++rejected;
  }
  if (rejected > 0) {
    throw DomainError(std::to_string(rejected) + " observation(s) are not positive finite numbers");
  }
  for (double y : data) {
    const double wi = w(y);
    s.log_y.push_back(std::log(y));
    s.weight.push_back(wi);
    sw.add(wi);
    if (wi > 0.0) swlw.add(wi * std::log(wi));
  }
  s.sum_weight = sw.value();
  s.sum_weight_log_weight = swlw.value();
  return s;
}

double weighted_loglik_value(const WeightedSample& s, const MixtureParams& p, double log_normalizer) {
  std::vector<double> log_h(s.size());
  mixture_log_pdfs(s.y, p, log_h);
  AccurateSum total;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.weight[i] > 0.0) total.add(s.weight[i] * log_h[i]);
  }
  total.add(s.sum_weight_log_weight);
  total.add(-s.sum_weight * log_normalizer);
  const double v = total.value();
  if (!std::isfinite(v)) throw NumericalError("weighted log-likelihood is not finite");
  return v;
}

double weighted_loglik_value(const WeightedSample& s, const MixtureParams& p, const WeightConfig& w) {
  return weighted_loglik_value(s, p, std::log(normalizer(w, p)));
}

ObjectiveValue weighted_loglik(std::span<const double> data, const MixtureParams& p, const WeightConfig& w) {
  const auto s = prepare_sample(data, w);
  const double log_norm = std::log(normalizer(w, p));
  std::vector<double> log_h(s.size());
  mixture_log_pdfs(s.y, p, log_h);
  ObjectiveValue out;
  out.contributions.resize(s.size(), 0.0);
  AccurateSum total;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double wi = s.weight[i];
    if (wi == 0.0) continue;
    const double c = wi * (log_h[i] + std::log(wi) - log_norm);
    if (!std::isfinite(c)) {
      std::ostringstream msg;
      msg << "weighted log-likelihood contribution of observation " << i << " (y = " << s.y[i]
          << ") is not finite";
      throw NumericalError(msg.str());
    }
    out.contributions[i] = c;
    total.add(c);
  }
  out.value = total.value();
  out.effective_n = s.sum_weight;
  return out;
}

std::vector<double> log_normalizer_gradient(const WeightConfig& w, const MixtureParams& p) {
  const std::size_t j_count = p.num_body();
  std::vector<double> grad(p.num_free(), 0.0);
  if (w.is_unit()) return grad;
  const double theta = p.tail_scale();
  const double gamma = p.tail_index();
  const LomaxComponent tail{theta, gamma};
  const double tail_mass = component_weighted_integral(w, tail, Moment::one);
  double total = p.tail_weight() * tail_mass;
  for (std::size_t j = 0; j < j_count; ++j) {
    const double mu = p.body_means()[j];
    const double phi = p.body_dispersions()[j];
    const GammaComponent c{mu, phi};
    const double m0 = component_weighted_integral(w, c, Moment::one);
    const double mu_moment = component_weighted_integral(w, c, Moment::value);
    const double log_moment = component_weighted_integral(w, c, Moment::log_value);
    total += p.weight(j) * m0;
    grad[j] = m0 - tail_mass;
    grad[j_count + j] = p.weight(j) * (mu_moment - mu * m0) / (phi * mu * mu);
    const double shape = 1.0 / phi;
    grad[2 * j_count + j] = p.weight(j) *
                            ((std::log(phi * mu) - 1.0 + special::digamma(shape)) * m0 - log_moment +
                             mu_moment / mu) /
                            (phi * phi);
  }
  std::size_t pos = 3 * j_count;
  if (p.theta_estimated()) {
    const double shifted = component_weighted_integral(w, LomaxComponent{theta, gamma + 1.0}, Moment::one);
    grad[pos++] = p.tail_weight() * (gamma / theta) * (tail_mass - shifted);
  }
  const double log_shifted = component_weighted_integral(w, tail, Moment::log_shifted);
  grad[pos] = p.tail_weight() * ((1.0 / gamma + std::log(theta)) * tail_mass - log_shifted);
  for (double& g : grad) g /= total;
  return grad;
}

std::vector<double> weighted_score(std::span<const double> data, const MixtureParams& p, const WeightConfig& w) {
  const auto s = prepare_sample(data, w);
  const std::size_t dim = p.num_free();
  const auto scores = mixture_scores(s.y, p);
  std::vector<AccurateSum> acc(dim);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double wi = s.weight[i];
    if (wi == 0.0) continue;
    for (std::size_t k = 0; k < dim; ++k) acc[k].add(wi * scores[i * dim + k]);
  }
  const auto correction = log_normalizer_gradient(w, p);
  std::vector<double> out(dim);
  for (std::size_t k = 0; k < dim; ++k) out[k] = acc[k].value() - s.sum_weight * correction[k];
  return out;
}

double truncated_loglik(std::span<const double> data, std::span<const std::uint8_t> keep, const MixtureParams& p,
                        const WeightConfig& w) {
  if (keep.size() != data.size()) throw DomainError("truncated_loglik: keep indicators must match the data");
  const double log_norm = std::log(normalizer(w, p));
  AccurateSum total;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!keep[i]) continue;
    const double wi = w(data[i]);
    total.add(mixture_log_pdf(data[i], p) + std::log(wi) - log_norm);
  }
  return total.value();
}

}  // namespace mwle
