#include <gtest/gtest.h>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <random>

#include "mwle/error.hpp"
#include "mwle/gem.hpp"
#include "mwle/simulation.hpp"
#include "oracles.hpp"

using namespace mwle;

namespace {

struct PlainState {
  std::vector<double> pi, mu, phi;
  double theta, gamma;
};

PlainState to_state(const MixtureParams& p) {
  return {{p.weights().begin(), p.weights().end()},
          {p.body_means().begin(), p.body_means().end()},
          {p.body_dispersions().begin(), p.body_dispersions().end()},
          p.tail_scale(),
          p.tail_index()};
}

// One step of textbook EM for a gamma-Lomax mixture with the Lomax scale held
// fixed.  Written from the complete-data likelihood, independent of the
// library's GEM code.
PlainState plain_em_step(const std::vector<double>& y, const PlainState& s) {
  const std::size_t J = s.mu.size();
  std::vector<double> count(J + 1, 0.0), sum_y(J, 0.0), sum_log(J, 0.0);
  double tail_log = 0.0;
  for (double v : y) {
    std::vector<double> r(J + 1);
    for (std::size_t j = 0; j < J; ++j) r[j] = s.pi[j] * oracle::gamma_pdf(v, s.mu[j], s.phi[j]);
    r[J] = s.pi[J] * oracle::lomax_pdf(v, s.theta, s.gamma);
    double total = 0.0;
    for (double x : r) total += x;
    for (std::size_t j = 0; j <= J; ++j) count[j] += r[j] / total;
    for (std::size_t j = 0; j < J; ++j) {
      sum_y[j] += r[j] / total * v;
      sum_log[j] += r[j] / total * std::log(v);
    }
    tail_log += r[J] / total * std::log1p(v / s.theta);
  }
  PlainState next = s;
  for (std::size_t j = 0; j <= J; ++j) next.pi[j] = count[j] / y.size();
  for (std::size_t j = 0; j < J; ++j) {
    next.mu[j] = sum_y[j] / count[j];
    const double target = std::log(next.mu[j]) - sum_log[j] / count[j];
    auto f = [&](double a) { return std::log(a) - boost::math::digamma(a) - target; };
    boost::math::tools::eps_tolerance<double> tol(50);
    std::uintmax_t iters = 200;
    const auto [lo, hi] = boost::math::tools::bisect(f, 1e-4, 1e7, tol, iters);
    next.phi[j] = 2.0 / (lo + hi);
  }
  next.gamma = count[J] / tail_log;
  return next;
}

MixtureParams from_state(const PlainState& s) {
  return MixtureParams(s.pi, s.mu, s.phi, s.theta, s.gamma, ThetaMode::fixed);
}

void expect_params_near(const MixtureParams& a, const MixtureParams& b, double rel, const std::string& label = {}) {
  const auto x = a.free_parameters(), y = b.free_parameters();
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(x[k], y[k], rel * std::abs(y[k])) << label << " parameter " << k;
}

MixtureParams random_start(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double p1 = 0.2 + 0.4 * u(gen), p2 = (0.9 - p1) * (0.3 + 0.5 * u(gen));
  return MixtureParams({p1, p2, 1.0 - p1 - p2}, {60.0 + 80.0 * u(gen), 220.0 + 200.0 * u(gen)},
                       {0.1 + 0.4 * u(gen), 0.1 + 0.4 * u(gen)}, 1000.0, 1.3 + 2.0 * u(gen), ThetaMode::fixed);
}

const std::vector<WeightConfig>& test_weights() {
  static const std::vector<WeightConfig> w{WeightConfig::unit(), WeightConfig::zig(0.01, 700.0, 0.1),
                                           WeightConfig::zig(0.25, 400.0, 1.0), WeightConfig::exp_cdf(300.0),
                                           WeightConfig::two_point(500.0, 0.3), WeightConfig::step(150.0)};
  return w;
}

}  // namespace

TEST(WeightTransform, RoundTripAndDefinition) {
  const std::vector<double> pi{0.2, 0.5, 0.3}, integrals{0.1, 0.6, 0.95};
  const auto star = pi_forward(pi, integrals);
  double total = 0.0;
  for (std::size_t j = 0; j < 3; ++j) total += pi[j] * integrals[j];
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(star[j], pi[j] * integrals[j] / total, 1e-15);
  const auto back = pi_backtransform(star, integrals);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(back[j], pi[j], 1e-15);
  EXPECT_THROW(pi_backtransform(star, std::vector<double>{0.1, 0.0, 0.9}), NumericalError);
  EXPECT_THROW(pi_backtransform(star, std::vector<double>{1e-320, 0.6, 0.9}), NumericalError);
}

TEST(Fit, NumericalFailureIsReportedAsAbort) {
  // Under a step weight the lower body sits entirely below the threshold, so
  // its weighted mass underflows and the transformed weights cannot be inverted.
  const auto data = sample(two_body_benchmark(), 2000, 3);
  FitOptions o;
  o.theta_mode = ThetaMode::fixed;
  o.init = MixtureParams({0.4, 0.4, 0.2}, {20.0, 300.0}, {0.05, 0.25}, 1000.0, 2.0);
  try {
    fit(data, WeightConfig::step(empirical_quantile(data, 0.8)), o);
  } catch (const FitAborted& e) {
    EXPECT_FALSE(e.trace().empty());
    for (std::size_t k = 1; k < e.trace().size(); ++k) EXPECT_GE(e.trace()[k].objective, e.trace()[k - 1].objective - 1e-9);
  }
}

TEST(RelativeChange, IsMeanAbsoluteLogRatio) {
  const auto a = two_body_benchmark();
  const MixtureParams b({0.5, 0.3, 0.2}, {110, 300}, {0.25, 0.2}, 1000, 2.5);
  const auto x = a.free_parameters(), y = b.free_parameters();
  double expected = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) expected += std::abs(std::log(y[k] / x[k])) / x.size();
  EXPECT_NEAR(relative_change(a, b), expected, 1e-15);
  EXPECT_EQ(relative_change(a, a), 0.0);
}

TEST(MethodName, RoundTrip) {
  EXPECT_EQ(parse_method(to_string(GemMethod::hypothetical)), GemMethod::hypothetical);
  EXPECT_EQ(parse_method(to_string(GemMethod::transformed)), GemMethod::transformed);
  EXPECT_THROW(parse_method("M3"), DomainError);
}

TEST(EStep, HypotheticalDrawQuantities) {
  const auto p = two_body_benchmark();
  const auto w = WeightConfig::zig(0.05, 500.0, 0.25);
  const auto data = sample(p, 300, 31);
  const auto s = prepare_sample(data, w);
  const auto e = estep_m1(s, p, w);

  // Weighted component masses on a dense grid.
  std::vector<double> masses;
  for (std::size_t j = 0; j < 2; ++j) {
    auto g = [&](double u) { return oracle::gamma_pdf(u, p.body_means()[j], p.body_dispersions()[j]) * w(u); };
    masses.push_back(oracle::log_grid_integral(g, -20.0, 12.0, w.breakpoints(), 1500));
  }
  auto g = [&](double u) { return oracle::lomax_pdf(u, p.tail_scale(), p.tail_index()) * w(u); };
  masses.push_back(oracle::log_grid_integral(g, -20.0, 30.0, w.breakpoints(), 1500));
  double total = 0.0;
  for (std::size_t j = 0; j < 3; ++j) total += p.weight(j) * masses[j];

  EXPECT_NEAR(e.k, (1.0 - total) / total, 1e-8 * e.k);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(e.z_prime[j], p.weight(j) * (1.0 - masses[j]) / (1.0 - total), 1e-8);
  }
  for (Eigen::Index i = 0; i < e.z.rows(); ++i) EXPECT_NEAR(e.z.row(i).sum(), 1.0, 1e-14);
}

TEST(EStep, TransformedResponsibilitiesUseTiltedDensities) {
  const auto p = three_body_benchmark();
  const auto w = WeightConfig::exp_cdf(250.0);
  const auto data = sample(p, 50, 32);
  const auto s = prepare_sample(data, w);
  const auto integrals = component_normalizers(w, p);
  const auto pi_star = pi_forward(p.weights(), integrals);
  const auto e = estep_m2(s, pi_star, p, w);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<double> r(4);
    double total = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      r[j] = pi_star[j] * oracle::gamma_pdf(data[i], p.body_means()[j], p.body_dispersions()[j]) / integrals[j];
    }
    r[3] = pi_star[3] * oracle::lomax_pdf(data[i], p.tail_scale(), p.tail_index()) / integrals[3];
    for (double v : r) total += v;
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(e.z_star(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), r[j] / total, 1e-12);
    }
  }
}

// Under unit weight both methods reduce to plain EM, step for step.
TEST(MStep, UnitWeightStepsMatchPlainEm) {
  const auto truth = two_body_benchmark();
  const auto data = sample(truth, 1000, 33);
  const auto w = WeightConfig::unit();
  const auto s = prepare_sample(data, w);
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto start = random_start(gen);
    const auto expected = from_state(plain_em_step(data, to_state(start)));
    expect_params_near(mstep_m1(s, estep_m1(s, start, w), w, start), expected, 1e-9, "M1");
    const auto pi_star = pi_forward(start.weights(), component_normalizers(w, start));
    // Method 2 maximizes each coordinate numerically.
    expect_params_near(mstep_m2(s, estep_m2(s, pi_star, start, w), w, start).params, expected, 1e-7, "M2");
  }
}

TEST(MStep, IncreasesExpectedObjective) {
  const auto truth = two_body_benchmark();
  const auto data = sample(truth, 800, 34);
  std::mt19937_64 gen(5);
  for (const auto& w : test_weights()) {
    const auto s = prepare_sample(data, w);
    for (int trial = 0; trial < 3; ++trial) {
      const auto p = random_start(gen);
      const auto e1 = estep_m1(s, p, w);
      const auto n1 = mstep_m1(s, e1, w, p);
      EXPECT_GE(q_function_m1(s, e1, n1), q_function_m1(s, e1, p) - 1e-9) << w.to_string();

      const auto pi_star = pi_forward(p.weights(), component_normalizers(w, p));
      const auto e2 = estep_m2(s, pi_star, p, w);
      const auto n2 = mstep_m2(s, e2, w, p);
      EXPECT_GE(q_function_m2(s, e2, n2.pi_star, n2.params, w), q_function_m2(s, e2, pi_star, p, w) - 1e-9)
          << w.to_string();
    }
  }
}

TEST(Fit, MatchesConvergedPlainEm) {
  const MixtureParams truth({0.7, 0.3}, {200.0}, {0.3}, 1000.0, 2.0);
  const auto data = sample(truth, 2000, 35);
  const MixtureParams start({0.6, 0.4}, {150.0}, {0.5}, 1000.0, 1.5);
  PlainState st = to_state(start);
  for (int iter = 0; iter < 20000; ++iter) {
    const auto next = plain_em_step(data, st);
    const double change = relative_change(from_state(st), from_state(next));
    st = next;
    if (change < 1e-13) break;
  }
  FitOptions o;
  o.num_body = 1;
  o.init = start;
  o.theta_mode = ThetaMode::fixed;
  o.tol = 1e-12;
  o.max_iter = 20000;
  for (auto method : {GemMethod::hypothetical, GemMethod::transformed}) {
    o.method = method;
    const auto f = fit(data, WeightConfig::unit(), o);
    EXPECT_TRUE(f.converged);
    expect_params_near(f.params, from_state(st), 1e-6, to_string(method));
  }
}

TEST(Fit, ObjectiveTraceIsNondecreasing) {
  const auto data = sample(two_body_benchmark(), 1500, 36);
  std::mt19937_64 gen(6);
  for (const auto& w : test_weights()) {
    for (bool acc : {false, true}) {
      for (auto method : {GemMethod::hypothetical, GemMethod::transformed}) {
        FitOptions o;
        o.init = random_start(gen);
        o.theta_mode = ThetaMode::fixed;
        o.method = method;
        o.accelerate = acc;
        o.max_iter = 300;
        const auto f = fit(data, w, o);
        for (std::size_t k = 1; k < f.trace.size(); ++k) {
          EXPECT_GE(f.trace[k].objective, f.trace[k - 1].objective - 1e-9)
              << w.to_string() << " " << to_string(method) << " accelerate " << acc << " iteration " << k;
        }
      }
    }
  }
}

TEST(Fit, MethodsAgreeAtTightTolerance) {
  const auto data = sample(two_body_benchmark(), 1000, 37);
  const auto w = WeightConfig::zig(0.05, 400.0, 0.25);
  FitOptions o;
  o.init = two_body_benchmark();
  o.theta_mode = ThetaMode::fixed;
  o.tol = 1e-10;
  o.max_iter = 50000;
  o.method = GemMethod::hypothetical;
  const auto a = fit(data, w, o);
  o.method = GemMethod::transformed;
  const auto b = fit(data, w, o);
  ASSERT_TRUE(a.converged && b.converged);
  expect_params_near(a.params, b.params, 1e-5);
  EXPECT_NEAR(a.objective.value, b.objective.value, 1e-7 * std::abs(b.objective.value));
}

TEST(Fit, AccelerationReachesSameOptimum) {
  const auto data = sample(two_body_benchmark(), 2000, 38);
  FitOptions o;
  o.theta_mode = ThetaMode::fixed;
  o.tol = 1e-10;
  o.max_iter = 50000;
  o.accelerate = false;
  const auto plain = fit(data, WeightConfig::unit(), o);
  o.accelerate = true;
  const auto fast = fit(data, WeightConfig::unit(), o);
  expect_params_near(fast.params, plain.params, 1e-5);
  EXPECT_LT(fast.iterations, plain.iterations);
}

TEST(Fit, IsDeterministic) {
  const auto data = sample(three_body_benchmark(), 1500, 39);
  FitOptions o;
  o.num_body = 3;
  const auto w = WeightConfig::exp_cdf(100.0);
  const auto a = fit(data, w, o), b = fit(data, w, o);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Fit, MultiStartIsNoWorseThanAnySingleStart) {
  const auto data = sample(two_body_benchmark(), 3000, 40);
  const auto w = WeightConfig::zig(0.01, empirical_quantile(data, 0.95), 0.1);
  FitOptions o;
  o.theta_mode = ThetaMode::fixed;
  o.fixed_theta = 1000.0;
  const double best = fit(data, w, o).objective.value;
  for (double level : {0.90, 0.95, 0.99}) {
    FitOptions single = o;
    single.init_config.threshold = InitConfig::Threshold::quantile;
    single.init_config.threshold_level = level;
    single.init_config.extra_start_levels.clear();
    EXPECT_GE(best, fit(data, w, single).objective.value - 1e-9) << level;
  }
}

TEST(Fit, FixedTailScaleStaysFixed) {
  const auto data = sample(two_body_benchmark(), 1000, 41);
  FitOptions o;
  o.theta_mode = ThetaMode::fixed;
  o.fixed_theta = 1234.0;
  const auto f = fit(data, WeightConfig::unit(), o);
  EXPECT_EQ(f.params.tail_scale(), 1234.0);
  EXPECT_EQ(f.params.num_free(), 7u);
}

TEST(Fit, EstimatedTailScaleIsStationary) {
  const auto data = sample(two_body_benchmark(), 2000, 42);
  FitOptions o;
  o.init = two_body_benchmark().with_theta_mode(ThetaMode::estimated);
  o.tol = 1e-9;
  o.max_iter = 50000;
  const auto f = fit(data, WeightConfig::unit(), o);
  ASSERT_TRUE(f.params.theta_estimated());
  const auto score = weighted_score(data, f.params, WeightConfig::unit());
  const auto free = f.params.free_parameters();
  // Relative sensitivities d L / d log x vanish at the optimum.
  for (std::size_t k = 0; k < score.size(); ++k) EXPECT_LT(std::abs(score[k] * free[k]), 0.05) << k;
}

TEST(Accelerate, KeepsCurrentWhenNoStepImproves) {
  const auto a = two_body_benchmark();
  const MixtureParams b({0.41, 0.39, 0.2}, {101, 299}, {0.25, 0.25}, 1000, 2.02);
  auto peak_at_b = [&](const MixtureParams& p) { return -relative_change(p, b); };
  const auto r = accelerate(a, b, 0.0, peak_at_b);
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.params, b);
}

TEST(Accelerate, TakesLongestImprovingStep) {
  const auto a = two_body_benchmark();
  const MixtureParams b({0.41, 0.39, 0.2}, {101, 299}, {0.25, 0.25}, 1000, 2.02);
  const auto far = detail::extrapolate(a, b, 4.0);
  auto toward_far = [&](const MixtureParams& p) { return -relative_change(p, far); };
  const auto r = accelerate(a, b, toward_far(b), toward_far);
  EXPECT_TRUE(r.accepted);
  expect_params_near(r.params, far, 1e-12);
}
