#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mwle/distributions.hpp"
#include "mwle/error.hpp"
#include "mwle/simulation.hpp"
#include "mwle/weights.hpp"
#include "integral_oracles.hpp"
#include "oracles.hpp"

using namespace mwle;
using oracle::gamma_reference;
using oracle::lomax_reference;

namespace {

struct Draw {
  GammaComponent gamma;
  LomaxComponent lomax;
  double location;
  double floor;
};

std::vector<Draw> draws(int count, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Draw> out;
  for (int k = 0; k < count; ++k) {
    out.push_back({{std::exp(2.0 + 5.0 * u(gen)), std::exp(-3.5 + 3.9 * u(gen))},
                   {std::exp(3.0 + 5.0 * u(gen)), 1.2 + 2.8 * u(gen)},
                   std::exp(2.0 + 6.0 * u(gen)),
                   u(gen)});
  }
  return out;
}

}  // namespace

TEST(WeightEval, SpecialValues) {
  const auto z = WeightConfig::zig(1.0, 50, 0.3);
  for (double y : {1e-3, 1.0, 40.0, 1e6}) EXPECT_EQ(z(y), 1.0);
  EXPECT_TRUE(z.is_unit());
  EXPECT_NEAR(WeightConfig::zig(0.07, 50, 0.3)(1e-12), 0.07, 1e-15);
  EXPECT_EQ(WeightConfig::step(5)(4.9), 0.0);
  EXPECT_EQ(WeightConfig::step(5)(5.1), 1.0);
  EXPECT_TRUE(WeightConfig::zig(0.2, 0.0, 0.3).is_unit());
  EXPECT_EQ(WeightConfig::zig(0.2, 0.0, 0.3)(0.5), 1.0);
}

TEST(WeightEval, BoundedMonotoneAndComplementConsistent) {
  const std::vector<WeightConfig> ws{WeightConfig::unit(), WeightConfig::step(30), WeightConfig::exp_cdf(120),
                                     WeightConfig::two_point(80, 0.3), WeightConfig::zig(0.05, 200, 0.25),
                                     WeightConfig::zig(0.0, 1000, 2.0)};
  for (const auto& w : ws) {
    double prev = 0.0;
    for (double y = 1e-3; y < 1e7; y *= 1.1) {
      const double v = w(y);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      EXPECT_GE(v, prev);
      EXPECT_NEAR(v + w.complement(y), 1.0, 1e-15);
      prev = v;
    }
  }
}

TEST(WeightParse, GrammarAndRoundTrip) {
  const std::vector<double> data{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_EQ(parse_weight("unit"), WeightConfig::unit());
  EXPECT_EQ(parse_weight("step:5"), WeightConfig::step(5));
  EXPECT_EQ(parse_weight("expcdf:q0.5", data), WeightConfig::exp_cdf(6));
  EXPECT_EQ(parse_weight("twopoint:3,0.25"), WeightConfig::two_point(3, 0.25));
  EXPECT_EQ(parse_weight("zig:0.01,q0.95,0.1", data), WeightConfig::zig(0.01, 10, 0.1));
  for (const auto& w : {WeightConfig::zig(0.01, 1234.5678901234, 0.1), WeightConfig::two_point(1.0 / 3, 0.7)}) {
    EXPECT_EQ(parse_weight(w.to_string()), w);
  }
  EXPECT_THROW(parse_weight("zig:0.1,q0.9"), DomainError);
  EXPECT_THROW(parse_weight("zig:0.1,q0.9,0.2"), DomainError);
  EXPECT_THROW(parse_weight("expcdf:abc"), DomainError);
  EXPECT_THROW(parse_weight("zig:1.5,3,0.2"), DomainError);
  EXPECT_THROW(parse_weight("twopoint:3,2"), DomainError);
  EXPECT_THROW(parse_weight("triangle:3"), DomainError);
}

TEST(WeightParse, EmpiricalQuantileConvention) {
  std::vector<double> data;
  for (int i = 100; i >= 1; --i) data.push_back(i);
  EXPECT_EQ(empirical_quantile(data, 0.9), 91.0);
  EXPECT_EQ(empirical_quantile(data, 0.0), 1.0);
  EXPECT_EQ(empirical_quantile(data, 0.999), 100.0);
}

TEST(Normalizer, UnitIsExactlyOne) { EXPECT_EQ(normalizer(WeightConfig::unit(), two_body_benchmark()), 1.0); }

TEST(Normalizer, StepIsSurvival) {
  for (double tau : {10.0, 250.0, 4000.0}) {
    EXPECT_NEAR(normalizer(WeightConfig::step(tau), two_body_benchmark()), mixture_sf(tau, two_body_benchmark()), 1e-10);
  }
}

TEST(Normalizer, ExpCdfMatchesDenseGrid) {
  const auto p = two_body_benchmark();
  const auto w = WeightConfig::exp_cdf(300);
  auto g = [&](double u) { return w(u) * mixture_pdf(u, p); };
  const double ref = oracle::log_grid_integral(g, -30.0, std::log(1000.0) + 40.0);
  EXPECT_LT(oracle::rel_diff(normalizer(w, p), ref), 1e-8);
}

TEST(Normalizer, NonincreasingInLocation) {
  const auto p = three_body_benchmark();
  double prev = 1.0;
  for (double mu : {0.0, 10.0, 50.0, 100.0, 300.0, 1000.0, 5000.0}) {
    const double i = normalizer(WeightConfig::zig(0.05, mu, 0.25), p);
    EXPECT_LE(i, prev + 1e-15);
    prev = i;
  }
}

TEST(ComponentIntegral, UnitGammaMassIsOne) {
  EXPECT_EQ(component_weighted_integral(WeightConfig::unit(), GammaComponent{10, 0.5}, Moment::one), 1.0);
}

TEST(ComponentIntegral, LomaxComplementUnderExpCdf) {
  // gamma (theta/mu)^gamma e^(theta/mu) Gamma(-gamma; theta/mu, inf)
  for (auto [theta, index, mu] : {std::tuple{1000.0, 2.0, 300.0}, {50.0, 1.3, 800.0}, {2000.0, 3.5, 20.0}}) {
    const double x = theta / mu;
    auto g = [&](double u) { return std::exp((-index - 1.0) * std::log(u) - u); };
    const double upper = oracle::simpson(g, x, x + 800.0, 4'000'000);
    const double expected = index * std::pow(x, index) * std::exp(x) * upper;
    const double got = component_weighted_integral(WeightConfig::exp_cdf(mu), LomaxComponent{theta, index}, Moment::one,
                                                   Side::complement);
    EXPECT_LT(oracle::rel_diff(got, expected), 1e-9) << theta << ' ' << index << ' ' << mu;
  }
}

TEST(ComponentIntegral, GammaUnderTwoPointWeight) {
  // W = 1 - phi + phi 1{y > mu}: weighted mass phi Q(alpha, beta mu) + 1 - phi.
  const GammaComponent c{150, 0.3};
  const double phi = 0.6, mu = 200;
  const double alpha = 1 / c.dispersion, beta = 1 / (c.dispersion * c.mean);
  auto g = [&](double v) { return std::exp((alpha - 1) * std::log(v) - v - std::lgamma(alpha)); };
  const double q = oracle::log_grid_integral(g, std::log(beta * mu), std::log(beta * mu) + std::log(300.0));
  const auto w = WeightConfig::two_point(mu, 1 - phi);
  EXPECT_LT(oracle::rel_diff(component_weighted_integral(w, c, Moment::one), phi * q + 1 - phi), 1e-10);
  EXPECT_LT(oracle::rel_diff(component_weighted_integral(w, c, Moment::one, Side::complement), phi * (1 - q)), 1e-10);
}

TEST(ComponentIntegral, SidesSumToOne) {
  const std::vector<WeightConfig> ws{WeightConfig::step(120), WeightConfig::exp_cdf(300), WeightConfig::two_point(90, 0.2),
                                     WeightConfig::zig(0.01, 500, 0.1), WeightConfig::zig(0.3, 50, 1.5)};
  for (const auto& d : draws(50, 31)) {
    for (const auto& w : ws) {
      EXPECT_NEAR(component_weighted_integral(w, d.gamma, Moment::one) +
                      component_weighted_integral(w, d.gamma, Moment::one, Side::complement),
                  1.0, 1e-9);
      EXPECT_NEAR(component_weighted_integral(w, d.lomax, Moment::one) +
                      component_weighted_integral(w, d.lomax, Moment::one, Side::complement),
                  1.0, 1e-9);
    }
  }
}

TEST(ComponentIntegral, ClosedFormsMatchGeneralQuadrature) {
  for (const auto& d : draws(50, 77)) {
    for (const auto& w : {WeightConfig::exp_cdf(d.location), WeightConfig::two_point(d.location, d.floor),
                          WeightConfig::step(d.location)}) {
      for (auto side : {Side::weighted, Side::complement}) {
        for (auto m : {Moment::one, Moment::value, Moment::log_value}) {
          const double cf = component_weighted_integral(w, d.gamma, m, side);
          const double qd = component_weighted_integral_quadrature(w, d.gamma, m, side);
          EXPECT_NEAR(cf, qd, 1e-8 * std::abs(qd)) << w.to_string() << " moment " << static_cast<int>(m) << " side "
                                                   << static_cast<int>(side) << " mean " << d.gamma.mean
                                                   << " dispersion " << d.gamma.dispersion;
        }
        for (auto m : {Moment::one, Moment::value, Moment::log_shifted}) {
          const double cf = component_weighted_integral(w, d.lomax, m, side);
          const double qd = component_weighted_integral_quadrature(w, d.lomax, m, side);
          EXPECT_NEAR(cf, qd, 1e-8 * std::abs(qd)) << w.to_string();
        }
      }
    }
  }
}

TEST(ComponentIntegral, MatchesDenseGridOracle) {
  for (const auto& d : draws(6, 5)) {
    for (const auto& w : {WeightConfig::exp_cdf(d.location), WeightConfig::two_point(d.location, d.floor),
                          WeightConfig::zig(0.02, d.location, 0.3)}) {
      for (auto side : {Side::weighted, Side::complement}) {
        for (auto m : {Moment::one, Moment::value, Moment::log_value}) {
          const double ref = gamma_reference(w, d.gamma, m, side);
          EXPECT_NEAR(component_weighted_integral(w, d.gamma, m, side), ref, 1e-8 * std::abs(ref) + 1e-14)
              << w.to_string();
        }
        for (auto m : {Moment::one, Moment::value, Moment::log_shifted}) {
          const double ref = lomax_reference(w, d.lomax, m, side);
          EXPECT_NEAR(component_weighted_integral(w, d.lomax, m, side), ref, 1e-8 * std::abs(ref) + 1e-14)
              << w.to_string();
        }
      }
    }
  }
}

TEST(ComponentIntegral, RejectsUnsupportedMoments) {
  EXPECT_THROW(component_weighted_integral(WeightConfig::unit(), GammaComponent{1, 1}, Moment::log_shifted), DomainError);
  EXPECT_THROW(component_weighted_integral(WeightConfig::unit(), LomaxComponent{1, 2}, Moment::log_value), DomainError);
}
