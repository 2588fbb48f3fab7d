#pragma once

// Scalar special functions used by the likelihood and its integrals.
// Accuracy target is about 1e-13 relative over the parameter ranges used
// for insurance loss models (shapes 1e-3 .. 1e4).

namespace mwle::special {

double log_gamma(double x);
double digamma(double x);
double trigamma(double x);

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Integral over [0, x] of log(v) v^(a-1) e^(-v) dv, divided by Gamma(a).
double gamma_lower_log_moment(double a, double x);
// Same integral over [x, inf).
double gamma_upper_log_moment(double a, double x);

double normal_cdf(double x);
double normal_quantile(double p);

}  // namespace mwle::special
