#pragma once

// Gamma body components, Lomax tail and their finite mixture.
//
// Gamma components use the mean/dispersion parametrisation: mean mu,
// variance phi * mu^2, shape 1/phi and rate 1/(phi mu).  The Lomax tail has
// scale theta and index gamma, with survival (1 + y/theta)^-gamma.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mwle {

enum class ThetaMode { fixed, estimated };

// Body-plus-tail mixture: J gamma components followed by one Lomax tail.
// Body components are kept sorted by mean, which removes label switching.
class MixtureParams {
 public:
  MixtureParams(std::vector<double> weights, std::vector<double> body_means,
                std::vector<double> body_dispersions, double tail_scale, double tail_index,
                ThetaMode theta_mode = ThetaMode::fixed);

  // Rebuilds parameters from the packed free vector (see free_parameters()).
  // fixed_tail_scale is used only when theta is fixed.
  static MixtureParams from_free(std::span<const double> free, std::size_t num_body,
                                 ThetaMode theta_mode, double fixed_tail_scale);

  std::size_t num_body() const { return means_.size(); }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> body_means() const { return means_; }
  std::span<const double> body_dispersions() const { return dispersions_; }
  double weight(std::size_t j) const { return weights_[j]; }
  double tail_weight() const { return weights_.back(); }
  double tail_scale() const { return tail_scale_; }
  double tail_index() const { return tail_index_; }
  ThetaMode theta_mode() const { return theta_mode_; }
  bool theta_estimated() const { return theta_mode_ == ThetaMode::estimated; }

  // Free parameters in the order pi_1..pi_J, mu_1..mu_J, phi_1..phi_J,
  // [theta,] gamma.  The tail weight is implied by the others.
  std::size_t num_free() const;
  std::vector<double> free_parameters() const;
  std::vector<std::string> free_parameter_names() const;

  MixtureParams with_theta_mode(ThetaMode mode) const;
  MixtureParams with_tail_scale(double theta) const;

  friend bool operator==(const MixtureParams&, const MixtureParams&) = default;

 private:
  std::vector<double> weights_;
  std::vector<double> means_;
  std::vector<double> dispersions_;
  double tail_scale_;
  double tail_index_;
  ThetaMode theta_mode_;
};

// Component densities and distribution functions.
double gamma_log_pdf(double y, double mean, double dispersion);
double gamma_cdf(double y, double mean, double dispersion);
double gamma_sf(double y, double mean, double dispersion);
double lomax_log_pdf(double y, double scale, double index);
double lomax_cdf(double y, double scale, double index);
double lomax_sf(double y, double scale, double index);

double mixture_pdf(double y, const MixtureParams& p);
double mixture_log_pdf(double y, const MixtureParams& p);
double mixture_cdf(double y, const MixtureParams& p);
double mixture_sf(double y, const MixtureParams& p);
double mixture_quantile(double q, const MixtureParams& p);

// log h at every point of data, written to out.
void mixture_log_pdfs(std::span<const double> data, const MixtureParams& p, std::span<double> out);

// Log-density of each component at y (J body entries, then the tail).
void component_log_pdfs(double y, const MixtureParams& p, std::span<double> out);

// Gradient of log h(y) with respect to the free parameters.
std::vector<double> mixture_score(double y, const MixtureParams& p);

// Evaluates scores for many points at once.  Row i of the returned
// row-major n x P buffer is the score at data[i].  log_density receives
// log h(data[i]) when non-empty.
std::vector<double> mixture_scores(std::span<const double> data, const MixtureParams& p,
                                   std::span<double> log_density = {});

// Pseudo-random source with platform-independent output for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();           // in (0, 1)
  double normal();            // standard normal
  double gamma(double shape); // unit rate
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

double sample_gamma(Rng& rng, double mean, double dispersion);
double sample_lomax(Rng& rng, double scale, double index);
std::vector<double> sample(const MixtureParams& p, std::size_t n, Rng& rng);
std::vector<double> sample(const MixtureParams& p, std::size_t n, std::uint64_t seed);

}  // namespace mwle
