#include "mwle/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mwle/error.hpp"
#include "mwle/likelihood.hpp"
#include "mwle/quadrature.hpp"
#include "mwle/special_functions.hpp"

namespace mwle {
namespace {

constexpr quad::Options kPopulation{1e-11, 0.0, 8000};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// int q(u) f(u) du for a gamma density, integrated in v = rate * u.
double gamma_expectation(const std::function<double(double)>& q, double mean, double dispersion,
                         std::span<const double> breaks) {
  const double shape = 1.0 / dispersion;
  const double rate = 1.0 / (dispersion * mean);
  const double lg = special::log_gamma(shape);
  auto plain = [&](double v) {
    if (v <= 0.0) return 0.0;
    const double d = std::exp((shape - 1.0) * std::log(v) - v - lg);
    return d == 0.0 ? 0.0 : d * q(v / rate);
  };
  const double mode = std::max(shape - 1.0, 1.0);
  const double sd = std::sqrt(shape);
  std::vector<double> pts{mode};
  for (double k : {-10.0, -4.0, 4.0, 10.0}) {
    if (mode + k * sd > 0.0) pts.push_back(mode + k * sd);
  }
  for (double b : breaks) {
    if (b > 0.0 && std::isfinite(b)) pts.push_back(b * rate);
  }
  double start = 0.0;
  double total = 0.0;
  if (shape < 1.0) {
    auto head = [&](double t) {
      if (t <= 0.0) return 0.0;
      const double v = std::exp(std::log(t) / shape);
      return std::exp(-v - std::log(shape) - lg) * q(v / rate);
    };
    total += quad::integrate(head, 0.0, 1.0, kPopulation).value;
    start = 1.0;
  }
  std::vector<double> finite{start};
  for (double p : sorted_unique(std::move(pts))) {
    if (p > start) finite.push_back(p);
  }
  if (finite.size() > 1) total += quad::integrate(plain, std::span<const double>(finite), kPopulation).value;
  total += quad::integrate_to_infinity(plain, finite.back(), std::max(1.0, sd), kPopulation).value;
  return total;
}

// int q(u) f(u) du for a Lomax density, integrated in r = S(u).
double lomax_expectation(const std::function<double(double)>& q, double scale, double index,
                         std::span<const double> breaks) {
  auto integrand = [&](double r) {
    if (r <= 0.0) return 0.0;
    const double u = scale * std::expm1(-std::log(r) / index);
    if (!std::isfinite(u)) return 0.0;
    return q(u);
  };
  std::vector<double> pts{0.0, 1.0};
  for (double b : breaks) {
    if (b > 0.0 && std::isfinite(b)) pts.push_back(std::exp(-index * std::log1p(b / scale)));
  }
  pts = sorted_unique(std::move(pts));
  return quad::integrate(integrand, std::span<const double>(pts), kPopulation).value;
}


}  // namespace

double model_expectation(const MixtureParams& params, const std::function<double(double)>& q,
                         std::span<const double> breaks) {
  double total = 0.0;
  for (std::size_t j = 0; j < params.num_body(); ++j) {
    if (params.weight(j) == 0.0) continue;
    total += params.weight(j) * gamma_expectation(q, params.body_means()[j], params.body_dispersions()[j], breaks);
  }
  if (params.tail_weight() > 0.0) {
    total += params.tail_weight() * lomax_expectation(q, params.tail_scale(), params.tail_index(), breaks);
  }
  return total;
}

Eigen::MatrixXd lambda_matrix(const SandwichMoments& m) {
  const Eigen::MatrixXd cross = m.w2_score * m.w_score.transpose();
  Eigen::MatrixXd out = m.w2_score_outer - (cross + cross.transpose()) / m.w +
                        (m.w2 / (m.w * m.w)) * (m.w_score * m.w_score.transpose());
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd gamma_matrix(const SandwichMoments& m) {
  Eigen::MatrixXd out = -m.w_score_outer + (m.w_score * m.w_score.transpose()) / m.w;
  return 0.5 * (out + out.transpose());
}

Eigen::MatrixXd sandwich_product(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& lambda) {
  const Eigen::Index dim = gamma.rows();
  // Condition number of the unit-diagonal rescaling, so that parameters on
  // very different scales do not count as ill-conditioning.
  Eigen::VectorXd scale(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double d = std::abs(gamma(k, k));
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw SingularMatrixError("sandwich matrix has a zero diagonal entry; try fewer components or another weight");
    }
    scale(k) = 1.0 / std::sqrt(d);
  }
  const Eigen::MatrixXd scaled = scale.asDiagonal() * gamma * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = eig.eigenvalues().cwiseAbs();
  const double cond = ev.maxCoeff() / ev.minCoeff();
  if (!(cond <= kMaxCondition)) {
    std::ostringstream msg;
    msg << "sandwich matrix is singular (condition number " << cond
        << "); try fewer components or a different weight function";
    throw SingularMatrixError(msg.str());
  }
  const auto solver = scaled.ldlt();
  // Gamma^-1 = S (S Gamma S)^-1 S with S = diag(scale).
  const Eigen::MatrixXd a = solver.solve(scale.asDiagonal() * lambda * scale.asDiagonal());
  const Eigen::MatrixXd b = solver.solve(a.transpose());
  Eigen::MatrixXd out = scale.asDiagonal() * b * scale.asDiagonal();
  return 0.5 * (out + out.transpose());
}

SandwichPair sandwich(std::span<const double> data, const MixtureParams& params, const WeightConfig& w) {
  const auto s = prepare_sample(data, w);
  const std::size_t n = s.size();
  const std::size_t dim = params.num_free();
  if (n == 0) throw DomainError("sandwich needs data");
  const auto scores = mixture_scores(s.y, params);
  SandwichMoments m;
  m.w2_score_outer = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  m.w_score_outer = m.w2_score_outer;
  m.w2_score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  m.w_score = m.w2_score;
  AccurateSum w2;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = s.weight[i];
    if (wi == 0.0) continue;
    const Eigen::Map<const Eigen::VectorXd> si(scores.data() + i * dim, static_cast<Eigen::Index>(dim));
    m.w_score_outer.noalias() += wi * si * si.transpose();
    m.w2_score_outer.noalias() += (wi * wi) * si * si.transpose();
    m.w_score += wi * si;
    m.w2_score += (wi * wi) * si;
    w2.add(wi * wi);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  m.w_score_outer *= inv_n;
  m.w2_score_outer *= inv_n;
  m.w_score *= inv_n;
  m.w2_score *= inv_n;
  m.w2 = w2.value() * inv_n;
  m.w = normalizer(w, params);

  SandwichPair out;
  out.n = n;
  out.lambda_hat = lambda_matrix(m);
  out.gamma_hat = gamma_matrix(m);
  out.covariance = sandwich_product(out.gamma_hat, out.lambda_hat) * inv_n;
  return out;
}

Eigen::VectorXd effective_parameter_diagonal(const SandwichPair& s) {
  // Condition check shared with the covariance computation.
  (void)sandwich_product(s.gamma_hat, s.lambda_hat);
  return -s.gamma_hat.ldlt().solve(s.lambda_hat).diagonal();
}

double effective_parameters(const SandwichPair& s) { return effective_parameter_diagonal(s).sum(); }

std::vector<double> standard_errors(const Eigen::MatrixXd& covariance) {
  std::vector<double> out(static_cast<std::size_t>(covariance.rows()));
  for (Eigen::Index k = 0; k < covariance.rows(); ++k) {
    const double v = covariance(k, k);
    if (v < 0.0) {
      throw NumericalError("negative variance for parameter " + std::to_string(k + 1) +
                           "; the covariance estimate is unusable");
    }
    out[static_cast<std::size_t>(k)] = std::sqrt(v);
  }
  return out;
}

std::vector<Interval> wald_ci(const MixtureParams& params, const Eigen::MatrixXd& covariance, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  const auto estimates = params.free_parameters();
  if (static_cast<std::size_t>(covariance.rows()) != estimates.size()) {
    throw DomainError("covariance does not match the parameter layout");
  }
  const double z = special::normal_quantile(0.5 + 0.5 * level);
  const auto se = standard_errors(covariance);
  std::vector<Interval> out;
  out.reserve(se.size());
  for (std::size_t k = 0; k < se.size(); ++k) out.push_back({estimates[k] - z * se[k], estimates[k] + z * se[k]});
  return out;
}

SandwichMoments population_moments(const MixtureParams& params, const WeightConfig& w) {
  const auto dim = static_cast<Eigen::Index>(params.num_free());
  const auto breaks = w.breakpoints();
  SandwichMoments m;
  m.w2_score_outer.resize(dim, dim);
  m.w_score_outer.resize(dim, dim);
  m.w2_score.resize(dim);
  m.w_score.resize(dim);
  for (Eigen::Index a = 0; a < dim; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    m.w_score(a) = model_expectation(params, [&](double u) { return w(u) * mixture_score(u, params)[ua]; }, breaks);
    m.w2_score(a) = model_expectation(
        params, [&](double u) { const double wu = w(u); return wu * wu * mixture_score(u, params)[ua]; }, breaks);
    for (Eigen::Index b = 0; b <= a; ++b) {
      const auto ub = static_cast<std::size_t>(b);
      auto outer = [&](double u, int power) {
        const double wu = w(u);
        if (wu == 0.0) return 0.0;
        const auto sc = mixture_score(u, params);
        return (power == 1 ? wu : wu * wu) * sc[ua] * sc[ub];
      };
      m.w_score_outer(a, b) = m.w_score_outer(b, a) =
          model_expectation(params, [&](double u) { return outer(u, 1); }, breaks);
      m.w2_score_outer(a, b) = m.w2_score_outer(b, a) =
          model_expectation(params, [&](double u) { return outer(u, 2); }, breaks);
    }
  }
  m.w = normalizer(w, params);
  m.w2 = model_expectation(params, [&](double u) { const double wu = w(u); return wu * wu; }, breaks);
  return m;
}

PopulationMatrices population_matrices(const MixtureParams& params, const WeightConfig& w) {
  PopulationMatrices out;
  const auto dim = static_cast<Eigen::Index>(params.num_free());
  out.fisher.resize(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      out.fisher(a, b) = out.fisher(b, a) = model_expectation(params, [&](double u) {
        const auto sc = mixture_score(u, params);
        return sc[static_cast<std::size_t>(a)] * sc[static_cast<std::size_t>(b)];
      });
    }
  }
  if (w.is_unit()) {
    // The score has mean zero under the model, so every correction term
    // vanishes identically.
    out.moments.w_score_outer = out.fisher;
    out.moments.w2_score_outer = out.fisher;
    out.moments.w_score = Eigen::VectorXd::Zero(dim);
    out.moments.w2_score = Eigen::VectorXd::Zero(dim);
    out.moments.w = 1.0;
    out.moments.w2 = 1.0;
  } else {
    out.moments = population_moments(params, w);
  }
  out.lambda = lambda_matrix(out.moments);
  out.gamma = gamma_matrix(out.moments);
  return out;
}

std::vector<double> tail_index_gradient(const MixtureParams& params) {
  std::vector<double> g(params.num_free(), 0.0);
  g.back() = 1.0;
  return g;
}

double aeff(const MixtureParams& params, const WeightConfig& w, std::span<const double> functional_gradient) {
  if (functional_gradient.size() != params.num_free()) {
    throw DomainError("functional gradient length does not match the number of free parameters");
  }
  const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(functional_gradient.data(),
                                                              static_cast<Eigen::Index>(functional_gradient.size()));
  const auto pop = population_matrices(params, w);
  const double mle = g.dot(pop.fisher.ldlt().solve(g));
  if (w.is_unit()) return 1.0;
  const Eigen::MatrixXd sigma = sandwich_product(pop.gamma, pop.lambda);
  const double mwle = g.dot(sigma * g);
  if (!(mle > 0.0) || !(mwle > 0.0)) throw NumericalError("asymptotic variances are not positive");
  return mle / mwle;
}

ContaminationSpec::ContaminationSpec(ContaminantAtom atom, double eps)
    : ContaminationSpec(std::vector<ContaminantAtom>{atom}, std::vector<double>{1.0}, eps) {}

ContaminationSpec::ContaminationSpec(std::vector<ContaminantAtom> a, std::vector<double> s, double eps)
    : atoms(std::move(a)), shares(std::move(s)), epsilon(eps) {
  if (atoms.empty() || atoms.size() != shares.size()) throw DomainError("contamination needs one share per atom");
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("contamination level must lie in [0, 1)");
  double total = 0.0;
  for (double v : shares) {
    if (!(v >= 0.0)) throw DomainError("contamination shares must be non-negative");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("contamination shares must sum to 1");
  for (const auto& atom : atoms) {
    std::visit(Overloaded{[](const PointMass& p) {
                            if (!(p.location > 0.0)) throw DomainError("point-mass location must be positive");
                          },
                          [](const LomaxContaminant& l) {
                            if (!(l.scale > 0.0) || !(l.index > 0.0)) {
                              throw DomainError("Lomax contaminant needs positive scale and index");
                            }
                          },
                          [](const ModelItself&) {}},
               atom);
  }
}

double contaminant_expectation(const ContaminationSpec& m, const MixtureParams& params,
                               const std::function<double(double)>& q) {
  double total = 0.0;
  for (std::size_t k = 0; k < m.atoms.size(); ++k) {
    const double value =
        std::visit(Overloaded{[&](const PointMass& p) { return q(p.location); },
                              [&](const LomaxContaminant& l) { return lomax_expectation(q, l.scale, l.index, {}); },
                              [&](const ModelItself&) { return model_expectation(params, q); }},
                   m.atoms[k]);
    total += m.shares[k] * value;
  }
  return total;
}

Eigen::VectorXd influence_function(const MixtureParams& params, const WeightConfig& w,
                                   const ContaminationSpec& contaminant) {
  const auto pop = population_matrices(params, w);
  const auto dim = static_cast<Eigen::Index>(params.num_free());
  Eigen::VectorXd brace(dim);
  const double m_w = contaminant_expectation(contaminant, params, [&](double u) { return w(u); });
  const double ratio = m_w / pop.moments.w;
  for (Eigen::Index a = 0; a < dim; ++a) {
    const double m_ws = contaminant_expectation(contaminant, params, [&](double u) {
      const double wu = w(u);
      return wu == 0.0 ? 0.0 : wu * mixture_score(u, params)[static_cast<std::size_t>(a)];
    });
    brace(a) = m_ws - ratio * pop.moments.w_score(a);
  }
  (void)sandwich_product(pop.gamma, pop.gamma);  // condition check
  return -pop.gamma.ldlt().solve(brace);
}

}  // namespace mwle
