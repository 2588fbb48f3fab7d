#include "mwle/weights.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "mwle/error.hpp"
#include "mwle/special_functions.hpp"

namespace mwle {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Integrals in the weights module feed log I into an objective summed over
// thousands of observations, so they are resolved close to roundoff.
constexpr quad::Options kTight{.rel_tol = 1e-14, .abs_tol = 0.0, .max_intervals = 4000};

void validate(const WeightConfig::Kind& kind) {
  std::visit(Overloaded{
                 [](const UnitWeight&) {},
                 [](const StepWeight& w) {
                   if (!(w.threshold >= 0.0) || !std::isfinite(w.threshold))
                     throw DomainError("step weight: threshold must be a non-negative number");
                 },
                 [](const ExpCdfWeight& w) {
                   if (!(w.location >= 0.0) || !std::isfinite(w.location))
                     throw DomainError("expcdf weight: location must be a non-negative number");
                 },
                 [](const TwoPointWeight& w) {
                   if (!(w.location >= 0.0) || !std::isfinite(w.location))
                     throw DomainError("twopoint weight: location must be a non-negative number");
                   if (!(w.floor >= 0.0 && w.floor <= 1.0))
                     throw DomainError("twopoint weight: floor must lie in [0, 1]");
                 },
                 [](const ZigWeight& w) {
                   if (!(w.point_mass >= 0.0 && w.point_mass <= 1.0))
                     throw DomainError("zig weight: point mass must lie in [0, 1]");
                   if (!(w.location >= 0.0) || !std::isfinite(w.location))
                     throw DomainError("zig weight: location must be a non-negative number");
                   if (!(w.dispersion > 0.0) || !std::isfinite(w.dispersion))
                     throw DomainError("zig weight: dispersion must be positive");
                 },
             },
             kind);
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& text, const std::string& context) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    throw DomainError("weight spec '" + context + "': cannot parse number '" + text + "'");
  }
  return v;
}

// ---- closed-form pieces -------------------------------------------------

struct GammaShape {
  double shape, rate, mean;
};

GammaShape shape_of(const GammaComponent& c) {
  if (!(c.mean > 0.0) || !(c.dispersion > 0.0)) throw DomainError("gamma component parameters must be positive");
  return {1.0 / c.dispersion, 1.0 / (c.dispersion * c.mean), c.mean};
}

void check_lomax(const LomaxComponent& c) {
  if (!(c.scale > 0.0) || !(c.index > 0.0)) throw DomainError("lomax component parameters must be positive");
}

void check_gamma_moment(Moment m) {
  if (m == Moment::log_shifted) throw DomainError("log(u + theta) moment applies to the lomax tail only");
}

void check_lomax_moment(Moment m) {
  if (m == Moment::log_value) throw DomainError("log(u) moment is not provided for the lomax tail");
}

double gamma_full(const GammaShape& g, Moment m) {
  switch (m) {
    case Moment::one: return 1.0;
    case Moment::value: return g.mean;
    default: return special::digamma(g.shape) - std::log(g.rate);
  }
}

// int_0^t q f for the gamma component.
double gamma_lower(const GammaShape& g, Moment m, double t) {
  const double x = g.rate * t;
  switch (m) {
    case Moment::one: return special::gamma_p(g.shape, x);
    case Moment::value: return g.mean * special::gamma_p(g.shape + 1.0, x);
    default:
      return special::gamma_lower_log_moment(g.shape, x) - std::log(g.rate) * special::gamma_p(g.shape, x);
  }
}

// int_t^inf q f for the gamma component.
double gamma_upper(const GammaShape& g, Moment m, double t) {
  const double x = g.rate * t;
  switch (m) {
    case Moment::one: return special::gamma_q(g.shape, x);
    case Moment::value: return g.mean * special::gamma_q(g.shape + 1.0, x);
    default:
      return special::gamma_upper_log_moment(g.shape, x) - std::log(g.rate) * special::gamma_q(g.shape, x);
  }
}

double lomax_full(const LomaxComponent& c, Moment m) {
  switch (m) {
    case Moment::one: return 1.0;
    case Moment::value:
      if (c.index <= 1.0) throw DomainError("lomax tail with index <= 1 has an infinite mean");
      return c.scale / (c.index - 1.0);
    default: return std::log(c.scale) + 1.0 / c.index;
  }
}

double lomax_lower(const LomaxComponent& c, Moment m, double t) {
  const double l1 = std::log1p(t / c.scale);
  const double s = std::exp(-c.index * l1);
  switch (m) {
    case Moment::one: return -std::expm1(-c.index * l1);
    case Moment::value: {
      // [theta - (theta + t) S] / (gamma - 1) - t S, without cancellation.
      const double head = (c.index == 1.0) ? c.scale * l1
                                           : -c.scale * std::expm1((1.0 - c.index) * l1) / (c.index - 1.0);
      return head - t * s;
    }
    default:
      return -std::expm1(-c.index * l1) * (std::log(c.scale) + 1.0 / c.index) - s * l1;
  }
}

double lomax_upper(const LomaxComponent& c, Moment m, double t) {
  const double s = lomax_sf(t, c.scale, c.index);
  switch (m) {
    case Moment::one: return s;
    case Moment::value:
      if (c.index <= 1.0) throw DomainError("lomax tail with index <= 1 has an infinite mean");
      return s * ((c.scale + t) / (c.index - 1.0) + t);
    default: return s * (std::log(c.scale + t) + 1.0 / c.index);
  }
}

// x^g e^x Gamma(-g, x) = int_0^inf x^g (x + w)^(-g-1) e^-w dw.
double scaled_upper_gamma_negative(double g, double x) {
  if (x >= 1.0) {
    // Continued fraction for Gamma(a, x) e^x x^-a with a = -g.
    const double a = -g;
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double cc = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 100000; ++i) {
      const double an = -i * (i - a);
      b += 2.0;
      d = an * d + b;
      if (std::abs(d) < tiny) d = tiny;
      cc = b + an / cc;
      if (std::abs(cc) < tiny) cc = tiny;
      d = 1.0 / d;
      const double delta = d * cc;
      h *= delta;
      if (std::abs(delta - 1.0) < 1e-15) return h;
    }
    throw NumericalError("incomplete gamma continued fraction (negative shape) did not converge");
  }
  auto integrand = [&](double w) { return std::exp(-(g + 1.0) * std::log1p(w / x) - w) / x; };
  const std::array<double, 3> pts{0.0, x, 1.0};
  const double head = quad::integrate(integrand, std::span<const double>(pts), kTight).value;
  const double tail = quad::integrate_to_infinity(integrand, 1.0, 1.0, kTight).value;
  return head + tail;
}

// Complement-side integrals for the exponential-CDF weight, 1 - W = e^(-u/m).
double expcdf_complement(const GammaShape& g, Moment m, double location) {
  const double c = 1.0 / location;
  const double log_ratio = -std::log1p(c / g.rate);  // log(beta / (beta + c))
  switch (m) {
    case Moment::one: return std::exp(g.shape * log_ratio);
    case Moment::value: return g.mean * std::exp((g.shape + 1.0) * log_ratio);
    default:
      return std::exp(g.shape * log_ratio) * (special::digamma(g.shape) - std::log(g.rate + c));
  }
}

double expcdf_complement(const LomaxComponent& t, Moment m, double location) {
  const double x = t.scale / location;
  switch (m) {
    case Moment::one: return t.index * scaled_upper_gamma_negative(t.index, x);
    case Moment::value: {
      // gamma theta [E(gamma - 1, x) - E(gamma, x)] with the recurrence for
      // Gamma(1 - gamma, x) folded in.
      const double e = scaled_upper_gamma_negative(t.index, x);
      return t.index * t.scale * (1.0 - (t.index + x) * e) / x;
    }
    default: {
      // log(u + theta) = log(theta) + log1p(u / theta); the second part has no
      // elementary antiderivative against e^(-u/m) and is integrated directly.
      auto integrand = [&](double u) {
        return std::log1p(u / t.scale) *
               std::exp(std::log(t.index) - (t.index + 1.0) * std::log1p(u / t.scale) - u / location) /
               t.scale;
      };
      const double lo = std::min(t.scale, location);
      const std::array<double, 3> pts{0.0, lo, std::max(t.scale, location)};
      const double head = quad::integrate(integrand, std::span<const double>(pts), kTight).value;
      const double tail = quad::integrate_to_infinity(integrand, pts[2], location, kTight).value;
      return std::log(t.scale) * expcdf_complement(t, Moment::one, location) + head + tail;
    }
  }
}

template <class Full, class Lower, class Upper, class Exp>
double closed_form(const WeightConfig& w, Side side, Full full, Lower lower, Upper upper,
                   Exp expcdf_c) {
  const bool weighted = side == Side::weighted;
  if (w.is_unit()) return weighted ? full() : 0.0;
  return std::visit(
      Overloaded{
          [&](const UnitWeight&) { return weighted ? full() : 0.0; },
          [&](const StepWeight& s) { return weighted ? upper(s.threshold) : lower(s.threshold); },
          [&](const TwoPointWeight& t) {
            const double below = (1.0 - t.floor) * lower(t.location);
            return weighted ? t.floor * full() + (1.0 - t.floor) * upper(t.location) : below;
          },
          [&](const ExpCdfWeight& e) {
            const double comp = expcdf_c(e.location);
            return weighted ? full() - comp : comp;
          },
          [&](const ZigWeight&) -> double { throw std::logic_error("zig weight has no closed form"); },
      },
      w.kind());
}

// ---- quadrature path ------------------------------------------------------

double side_value(const WeightConfig& w, Side side, double u) {
  return side == Side::weighted ? w(u) : w.complement(u);
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

WeightConfig::WeightConfig(Kind kind) : kind_(std::move(kind)) { validate(kind_); }

double WeightConfig::operator()(double y) const {
  return std::visit(Overloaded{
                        [](const UnitWeight&) { return 1.0; },
                        [&](const StepWeight& s) { return y >= s.threshold ? 1.0 : 0.0; },
                        [&](const ExpCdfWeight& e) {
                          if (e.location == 0.0) return 1.0;
                          return -std::expm1(-y / e.location);
                        },
                        [&](const TwoPointWeight& t) {
                          if (t.location == 0.0 && y > 0.0) return 1.0;
                          return y > t.location ? 1.0 : t.floor;
                        },
                        [&](const ZigWeight& z) {
                          if (z.point_mass == 1.0 || z.location == 0.0) return 1.0;
                          return z.point_mass + (1.0 - z.point_mass) * gamma_cdf(y, z.location, z.dispersion);
                        },
                    },
                    kind_);
}

double WeightConfig::complement(double y) const {
  return std::visit(Overloaded{
                        [](const UnitWeight&) { return 0.0; },
                        [&](const StepWeight& s) { return y >= s.threshold ? 0.0 : 1.0; },
                        [&](const ExpCdfWeight& e) {
                          if (e.location == 0.0) return 0.0;
                          return std::exp(-y / e.location);
                        },
                        [&](const TwoPointWeight& t) {
                          if (t.location == 0.0 && y > 0.0) return 0.0;
                          return y > t.location ? 0.0 : 1.0 - t.floor;
                        },
                        [&](const ZigWeight& z) {
                          if (z.point_mass == 1.0 || z.location == 0.0) return 0.0;
                          return (1.0 - z.point_mass) * gamma_sf(y, z.location, z.dispersion);
                        },
                    },
                    kind_);
}

bool WeightConfig::is_unit() const {
  return std::visit(Overloaded{
                        [](const UnitWeight&) { return true; },
                        [](const StepWeight& s) { return s.threshold == 0.0; },
                        [](const ExpCdfWeight& e) { return e.location == 0.0; },
                        [](const TwoPointWeight& t) { return t.location == 0.0 || t.floor == 1.0; },
                        [](const ZigWeight& z) { return z.point_mass == 1.0 || z.location == 0.0; },
                    },
                    kind_);
}

std::vector<double> WeightConfig::breakpoints() const {
  if (is_unit()) return {};
  return std::visit(Overloaded{
                        [](const UnitWeight&) { return std::vector<double>{}; },
                        [](const StepWeight& s) { return std::vector<double>{s.threshold}; },
                        [](const ExpCdfWeight& e) { return std::vector<double>{e.location}; },
                        [](const TwoPointWeight& t) { return std::vector<double>{t.location}; },
                        [](const ZigWeight& z) {
                          const double sd = std::sqrt(z.dispersion);
                          std::vector<double> pts{z.location};
                          for (double k : {-3.0, -1.5, 1.5, 3.0, 6.0}) {
                            const double p = z.location * (1.0 + k * sd);
                            if (p > 0.0) pts.push_back(p);
                          }
                          return sorted_unique(std::move(pts));
                        },
                    },
                    kind_);
}

std::string WeightConfig::to_string() const {
  return std::visit(Overloaded{
                        [](const UnitWeight&) { return std::string("unit"); },
                        [](const StepWeight& s) { return "step:" + format_number(s.threshold); },
                        [](const ExpCdfWeight& e) { return "expcdf:" + format_number(e.location); },
                        [](const TwoPointWeight& t) {
                          return "twopoint:" + format_number(t.location) + "," + format_number(t.floor);
                        },
                        [](const ZigWeight& z) {
                          return "zig:" + format_number(z.point_mass) + "," + format_number(z.location) +
                                 "," + format_number(z.dispersion);
                        },
                    },
                    kind_);
}

double empirical_quantile(std::span<const double> data, double level) {
  if (data.empty()) throw DomainError("empirical quantile of an empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  std::vector<double> sorted(data.begin(), data.end());
  const auto n = sorted.size();
  const double pos = std::ceil(static_cast<double>(n) * level - 1e-9);
  const std::size_t k = std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::max(0.0, pos)));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
  return sorted[k];
}

WeightConfig parse_weight(const std::string& text, std::span<const double> sample) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::vector<std::string> args;
  if (colon != std::string::npos) {
    std::stringstream rest(text.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) args.push_back(item);
  }
  const auto expect = [&](std::size_t count) {
    if (args.size() != count) {
      throw DomainError("weight spec '" + text + "': expected " + std::to_string(count) + " argument(s)");
    }
  };
  const auto number = [&](const std::string& s) { return parse_number(s, text); };
  const auto location = [&](const std::string& s) {
    if (!s.empty() && (s[0] == 'q' || s[0] == 'Q')) {
      if (sample.empty()) throw DomainError("weight spec '" + text + "': quantile location needs data");
      return empirical_quantile(sample, parse_number(s.substr(1), text));
    }
    return number(s);
  };
  if (name == "unit") {
    expect(0);
    return WeightConfig::unit();
  }
  if (name == "step") {
    expect(1);
    return WeightConfig::step(location(args[0]));
  }
  if (name == "expcdf") {
    expect(1);
    return WeightConfig::exp_cdf(location(args[0]));
  }
  if (name == "twopoint") {
    expect(2);
    return WeightConfig::two_point(location(args[0]), number(args[1]));
  }
  if (name == "zig") {
    expect(3);
    return WeightConfig::zig(number(args[0]), location(args[1]), number(args[2]));
  }
  throw DomainError("unknown weight kind '" + name + "'");
}

double component_weighted_integral_quadrature(const WeightConfig& w, const GammaComponent& c, Moment m,
                                              Side side, const quad::Options& opt) {
  check_gamma_moment(m);
  const GammaShape g0 = shape_of(c);
  // The value moment is the one moment of the shape + 1 component times mu.
  const double shape = (m == Moment::value) ? g0.shape + 1.0 : g0.shape;
  const double factor = (m == Moment::value) ? g0.mean : 1.0;
  const double rate = g0.rate;
  const double log_rate = std::log(rate);
  const double lg = special::log_gamma(shape);
  auto body = [&](double v) {
    // Integrand in v = rate * u, without the density.
    const double u = v / rate;
    const double s = side_value(w, side, u);
    if (s == 0.0) return 0.0;
    return m == Moment::log_value ? s * (std::log(v) - log_rate) : s;
  };
  auto density = [&](double v) {
    if (v <= 0.0) return 0.0;
    return std::exp((shape - 1.0) * std::log(v) - v - lg);
  };

  std::vector<double> pts;
  const double mode = std::max(shape - 1.0, 1.0);
  const double sd = std::sqrt(shape);
  pts.push_back(mode);
  for (double k : {-10.0, -4.0, 4.0, 10.0}) {
    const double p = mode + k * sd;
    if (p > 0.0) pts.push_back(p);
  }
  for (double b : w.breakpoints()) {
    if (b > 0.0 && std::isfinite(b)) pts.push_back(b * rate);
  }
  if (shape < 1.0) pts.push_back(1.0);
  pts = sorted_unique(std::move(pts));

  double total = 0.0;
  double start = 0.0;
  if (shape < 1.0) {
    // Power substitution v = t^(1/shape) on [0, 1] removes the singularity.
    auto head = [&](double t) {
      if (t <= 0.0) return 0.0;
      const double v = std::exp(std::log(t) / shape);
      return std::exp(-v - std::log(shape) - lg) * body(v);
    };
    // Weight breakpoints below v = 1 map to t = v^shape.
    std::vector<double> head_pts{0.0};
    for (double p : pts) {
      if (p < 1.0) head_pts.push_back(std::exp(shape * std::log(p)));
    }
    head_pts.push_back(1.0);
    total += quad::integrate(head, std::span<const double>(sorted_unique(std::move(head_pts))), opt).value;
    start = 1.0;
  }
  std::vector<double> finite{start};
  for (double p : pts) {
    if (p > start) finite.push_back(p);
  }
  auto plain = [&](double v) {
    const double d = density(v);
    return d == 0.0 ? 0.0 : d * body(v);
  };
  if (finite.size() > 1) total += quad::integrate(plain, std::span<const double>(finite), opt).value;
  total += quad::integrate_to_infinity(plain, finite.back(), std::max(1.0, sd), opt).value;
  return factor * total;
}

double component_weighted_integral_quadrature(const WeightConfig& w, const LomaxComponent& c, Moment m,
                                              Side side, const quad::Options& opt) {
  check_lomax(c);
  check_lomax_moment(m);
  // Integrate over r = S(u) in (0, 1].  For the value moment on the weighted
  // side use u f(u; gamma) = gamma theta / (gamma - 1) * u / (u + theta) f(u; gamma - 1)
  // so the integrand stays bounded.
  const bool shifted = (m == Moment::value && side == Side::weighted);
  if (shifted && c.index <= 1.0) throw DomainError("lomax tail with index <= 1 has an infinite mean");
  const double index = shifted ? c.index - 1.0 : c.index;
  const double factor = shifted ? c.index * c.scale / (c.index - 1.0) : 1.0;
  const double theta = c.scale;
  auto u_of = [&](double r) { return theta * std::expm1(-std::log(r) / index); };
  auto integrand = [&](double r) {
    if (r <= 0.0) return 0.0;
    const double u = u_of(r);
    if (!std::isfinite(u)) return 0.0;
    const double s = side_value(w, side, u);
    if (s == 0.0) return 0.0;
    switch (m) {
      case Moment::one: return s;
      case Moment::value: return shifted ? s * u / (u + theta) : s * u;
      default: return s * (std::log(theta) - std::log(r) / c.index);
    }
  };
  std::vector<double> pts{0.0, 1.0};
  for (double b : w.breakpoints()) {
    if (b > 0.0 && std::isfinite(b)) pts.push_back(std::exp(-index * std::log1p(b / theta)));
  }
  pts = sorted_unique(std::move(pts));
  return factor * quad::integrate(integrand, std::span<const double>(pts), opt).value;
}

double component_weighted_integral(const WeightConfig& w, const GammaComponent& c, Moment m, Side side) {
  check_gamma_moment(m);
  if (std::holds_alternative<ZigWeight>(w.kind()) && !w.is_unit()) {
    return component_weighted_integral_quadrature(w, c, m, side, kTight);
  }
  const GammaShape g = shape_of(c);
  return closed_form(
      w, side, [&] { return gamma_full(g, m); }, [&](double t) { return gamma_lower(g, m, t); },
      [&](double t) { return gamma_upper(g, m, t); },
      [&](double loc) { return expcdf_complement(g, m, loc); });
}

double component_weighted_integral(const WeightConfig& w, const LomaxComponent& c, Moment m, Side side) {
  check_lomax(c);
  check_lomax_moment(m);
  if (m == Moment::value && side == Side::weighted && !w.is_unit() && c.index <= 1.0) {
    throw DomainError("lomax tail with index <= 1 has an infinite mean");
  }
  if (std::holds_alternative<ZigWeight>(w.kind()) && !w.is_unit()) {
    return component_weighted_integral_quadrature(w, c, m, side, kTight);
  }
  return closed_form(
      w, side, [&] { return lomax_full(c, m); }, [&](double t) { return lomax_lower(c, m, t); },
      [&](double t) { return lomax_upper(c, m, t); },
      [&](double loc) { return expcdf_complement(c, m, loc); });
}

std::vector<double> component_normalizers(const WeightConfig& w, const MixtureParams& p) {
  std::vector<double> out(p.num_body() + 1, 1.0);
  if (w.is_unit()) return out;
  for (std::size_t j = 0; j < p.num_body(); ++j) {
    out[j] = component_weighted_integral(w, GammaComponent{p.body_means()[j], p.body_dispersions()[j]},
                                         Moment::one, Side::weighted);
  }
  out.back() = component_weighted_integral(w, LomaxComponent{p.tail_scale(), p.tail_index()}, Moment::one,
                                           Side::weighted);
  return out;
}

double normalizer(const WeightConfig& w, const MixtureParams& p) {
  if (w.is_unit()) return 1.0;
  const auto parts = component_normalizers(w, p);
  double total = 0.0;
  for (std::size_t j = 0; j < parts.size(); ++j) total += p.weights()[j] * parts[j];
  return total;
}

}  // namespace mwle
