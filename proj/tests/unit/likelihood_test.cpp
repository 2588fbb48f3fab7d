#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <random>

#include "mwle/likelihood.hpp"
#include "mwle/simulation.hpp"
#include "oracles.hpp"

using namespace mwle;

namespace {

double mixture_pdf_reference(double y, const MixtureParams& p) {
  double h = p.tail_weight() * oracle::lomax_pdf(y, p.tail_scale(), p.tail_index());
  for (std::size_t j = 0; j < p.num_body(); ++j) {
    h += p.weight(j) * oracle::gamma_pdf(y, p.body_means()[j], p.body_dispersions()[j]);
  }
  return h;
}

double zig_reference(double y, double xi, double location, double dispersion) {
  return xi + (1.0 - xi) * boost::math::gamma_p(1.0 / dispersion, y / (dispersion * location));
}

// int h W over (0, inf) on a dense grid.
double normalizer_reference(const MixtureParams& p, const WeightConfig& w,
                            const std::function<double(double)>& weight) {
  auto g = [&](double u) { return mixture_pdf_reference(u, p) * weight(u); };
  return oracle::log_grid_integral(g, -30.0, std::log(p.tail_scale()) + 40.0 / p.tail_index(), w.breakpoints(), 1500);
}

MixtureParams perturb(const MixtureParams& p, std::size_t k, double v) {
  auto free = p.free_parameters();
  free[k] = v;
  return MixtureParams::from_free(free, p.num_body(), p.theta_mode(), p.tail_scale());
}

}  // namespace

TEST(WeightedLoglik, UnitWeightIsPlainLogLikelihood) {
  const auto p = two_body_benchmark();
  const auto data = sample(p, 500, 11);
  const auto obj = weighted_loglik(data, p, WeightConfig::unit());
  double expected = 0.0;
  for (double y : data) expected += std::log(mixture_pdf_reference(y, p));
  EXPECT_NEAR(obj.value, expected, 1e-9 * std::abs(expected));
  EXPECT_DOUBLE_EQ(obj.effective_n, 500.0);
  ASSERT_EQ(obj.contributions.size(), data.size());
}

TEST(WeightedLoglik, ZigWeightMatchesDirectEvaluation) {
  const auto p = two_body_benchmark();
  const auto data = sample(p, 400, 12);
  const double xi = 0.05, loc = 400.0, disp = 0.1;
  const auto w = WeightConfig::zig(xi, loc, disp);
  auto weight = [&](double y) { return zig_reference(y, xi, loc, disp); };
  const double log_i = std::log(normalizer_reference(p, w, weight));

  double expected = 0.0, wsum = 0.0;
  for (double y : data) {
    const double wy = weight(y);
    expected += wy * (std::log(mixture_pdf_reference(y, p)) + std::log(wy) - log_i);
    wsum += wy;
  }
  const auto obj = weighted_loglik(data, p, w);
  EXPECT_NEAR(obj.value, expected, 1e-8 * std::abs(expected));
  EXPECT_NEAR(obj.effective_n, wsum, 1e-10 * wsum);
}

TEST(WeightedLoglik, StepWeightDropsObservationsBelowThreshold) {
  const auto p = two_body_benchmark();
  const auto data = sample(p, 300, 13);
  const double tau = 400.0;
  const auto obj = weighted_loglik(data, p, WeightConfig::step(tau));
  const double log_sf = std::log(mixture_sf(tau, p));
  double expected = 0.0;
  for (double y : data) {
    if (y >= tau) expected += std::log(mixture_pdf_reference(y, p)) - log_sf;
  }
  EXPECT_TRUE(std::isfinite(obj.value));
  EXPECT_NEAR(obj.value, expected, 1e-9 * std::abs(expected));
}

TEST(WeightedLoglik, InvariantToDataOrder) {
  const auto p = two_body_benchmark();
  auto data = sample(p, 300, 14);
  const auto w = WeightConfig::zig(0.01, 500.0, 0.25);
  const double a = weighted_loglik(data, p, w).value;
  std::mt19937_64 gen(3);
  std::shuffle(data.begin(), data.end(), gen);
  EXPECT_NEAR(weighted_loglik(data, p, w).value, a, 1e-11 * std::abs(a));
}

TEST(WeightedLoglik, PreparedSampleAgreesWithDirectCall) {
  const auto p = three_body_benchmark();
  const auto data = sample(p, 300, 15);
  const auto w = WeightConfig::exp_cdf(250.0);
  const auto s = prepare_sample(data, w);
  const double direct = weighted_loglik(data, p, w).value;
  EXPECT_NEAR(weighted_loglik_value(s, p, w), direct, 1e-11 * std::abs(direct));
  EXPECT_NEAR(weighted_loglik_value(s, p, std::log(normalizer(w, p))), direct, 1e-11 * std::abs(direct));

  double wlogw = 0.0;
  for (double y : data) wlogw += w(y) * std::log(w(y));
  EXPECT_NEAR(s.sum_weight_log_weight, wlogw, 1e-10 * std::abs(wlogw));
}

TEST(WeightedLoglik, ZeroWeightsContributeNothing) {
  const auto s = prepare_sample(std::vector<double>{1.0, 2.0, 500.0}, WeightConfig::step(100.0));
  EXPECT_EQ(s.weight[0], 0.0);
  EXPECT_EQ(s.sum_weight_log_weight, 0.0);
  EXPECT_EQ(s.sum_weight, 1.0);
}

TEST(WeightedScore, MatchesFiniteDifferences) {
  const std::vector<MixtureParams> models{two_body_benchmark(), two_body_benchmark().with_theta_mode(ThetaMode::estimated),
                                          three_body_benchmark()};
  const std::vector<WeightConfig> weights{WeightConfig::unit(), WeightConfig::zig(0.05, 400.0, 0.25),
                                          WeightConfig::exp_cdf(300.0), WeightConfig::two_point(350.0, 0.2)};
  for (const auto& p : models) {
    const auto data = sample(p, 200, 16);
    for (const auto& w : weights) {
      const auto score = weighted_score(data, p, w);
      const auto free = p.free_parameters();
      ASSERT_EQ(score.size(), free.size());
      for (std::size_t k = 0; k < free.size(); ++k) {
        auto f = [&](double v) { return weighted_loglik(data, perturb(p, k, v), w).value; };
        const double fd = oracle::derivative(f, free[k], 1e-6);
        const double scale = std::max(1.0, std::abs(fd));
        EXPECT_NEAR(score[k], fd, 2e-4 * scale) << w.to_string() << " parameter " << k;
      }
    }
  }
}

TEST(WeightedScore, LogNormalizerGradientMatchesFiniteDifferences) {
  const auto p = two_body_benchmark().with_theta_mode(ThetaMode::estimated);
  const auto w = WeightConfig::zig(0.01, 600.0, 0.1);
  const auto grad = log_normalizer_gradient(w, p);
  const auto free = p.free_parameters();
  for (std::size_t k = 0; k < free.size(); ++k) {
    auto f = [&](double v) { return std::log(normalizer(w, perturb(p, k, v))); };
    const double fd = oracle::derivative(f, free[k], 1e-6);
    EXPECT_NEAR(grad[k], fd, 1e-6 * std::max(1.0, std::abs(fd))) << "parameter " << k;
  }
}

TEST(WeightedScore, UnitWeightNormalizerGradientVanishes) {
  for (double g : log_normalizer_gradient(WeightConfig::unit(), two_body_benchmark())) EXPECT_EQ(g, 0.0);
}

TEST(TruncatedLoglik, SumsKeptObservations) {
  const auto p = two_body_benchmark();
  const auto data = sample(p, 200, 17);
  const auto w = WeightConfig::exp_cdf(200.0);
  std::vector<std::uint8_t> keep(data.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i % 3 != 0;
  const double log_i = std::log(normalizer(w, p));
  double expected = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (keep[i]) expected += std::log(mixture_pdf_reference(data[i], p) * (1.0 - std::exp(-data[i] / 200.0))) - log_i;
  }
  EXPECT_NEAR(truncated_loglik(data, keep, p, w), expected, 1e-9 * std::abs(expected));
}

TEST(AccurateSum, RecoversCancelledTerms) {
  AccurateSum s;
  for (double x : {1e16, 1.0, -1e16, 1.0}) s.add(x);
  EXPECT_EQ(s.value(), 2.0);
}
