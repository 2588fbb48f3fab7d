#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>
#include <sstream>

#include "io.hpp"
#include "mwle/asymptotics.hpp"
#include "mwle/error.hpp"
#include "mwle/gem.hpp"
#include "mwle/selection.hpp"
#include "mwle/simulation.hpp"

namespace mwle::cli {
namespace {

double to_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DomainError("cannot read " + what + " from '" + s + "'");
  return v;
}

// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

struct ThetaChoice {
  ThetaMode mode = ThetaMode::estimated;
  std::optional<double> value;
};

ThetaChoice parse_theta(const std::string& text) {
  if (text == "estimated") return {};
  if (text == "fixed") return {ThetaMode::fixed, std::nullopt};
  const std::string body = text.rfind("fixed:", 0) == 0 ? text.substr(6) : text;
  const double v = to_double(body, "tail scale");
  if (!(v > 0.0)) throw DomainError("fixed tail scale must be positive");
  return {ThetaMode::fixed, v};
}

InitConfig parse_tau(const std::string& text, std::uint64_t seed) {
  InitConfig c;
  c.seed = seed;
  if (text == "auto") {
    c.threshold = InitConfig::Threshold::automatic;
  } else if (!text.empty() && (text[0] == 'q' || text[0] == 'Q')) {
    c.threshold = InitConfig::Threshold::quantile;
    c.threshold_level = to_double(text.substr(1), "threshold level");
  } else {
    c.threshold = InitConfig::Threshold::absolute;
    c.threshold_value = to_double(text, "threshold");
  }
  return c;
}

FitOptions fit_options(const RunConfig& config) {
  FitOptions o;
  o.num_body = config.num_body;
  o.method = parse_method(config.method);
  const auto theta = parse_theta(config.theta);
  o.theta_mode = theta.mode;
  o.fixed_theta = theta.value;
  o.init_config = parse_tau(config.tau, config.seed);
  o.tol = config.tol;
  o.max_iter = config.max_iter;
  o.accelerate = !config.no_accelerate;
  return o;
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

void print_fit(const FitResult& f, const std::optional<SandwichPair>& sw) {
  const auto names = f.params.free_parameter_names();
  const auto est = f.params.free_parameters();
  std::vector<double> se;
  if (sw) se = standard_errors(sw->covariance);
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::cout << "  " << names[k] << " = " << format_number(est[k]);
    if (!se.empty()) std::cout << "  (se " << format_number(se[k]) << ")";
    std::cout << '\n';
  }
  std::cout << "  objective = " << format_number(f.objective.value) << ", iterations = " << f.iterations
            << (f.converged ? ", converged" : ", NOT converged") << '\n';
  for (const auto& w : f.warnings) std::cerr << "warning: " << w << '\n';
}

std::string scan_csv(const ScanResult& scan) {
  std::string out = "J,objective,num_params,effective_n,effective_parameters,raic,rbic,taic,tbic,iterations,converged,error\n";
  for (const auto& e : scan.entries) {
    out += std::to_string(e.num_body);
    if (e.fit && e.report) {
      const auto& r = *e.report;
      out += ',' + format_number(r.objective) + ',' + std::to_string(r.num_params) + ',' + format_number(r.effective_n) +
             ',' + optional_number(r.effective_parameters) + ',' + optional_number(r.raic) + ',' +
             optional_number(r.rbic) + ',' + format_number(r.taic) + ',' + format_number(r.tbic) + ',' +
             std::to_string(e.fit->iterations) + ',' + (e.fit->converged ? "1" : "0") + ",";
    } else {
      out += ",,,,,,,,,,," + csv_field(e.error);
    }
    out += '\n';
  }
  return out;
}

ContaminationSpec parse_contaminant(const std::string& text, double eps) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "point") return ContaminationSpec(PointMass{to_double(args, "point-mass location")}, eps);
  if (kind == "lomax") {
    const auto comma = args.find(',');
    if (comma == std::string::npos) throw DomainError("lomax contaminant needs SCALE,INDEX");
    return ContaminationSpec(
        LomaxContaminant{to_double(args.substr(0, comma), "scale"), to_double(args.substr(comma + 1), "index")}, eps);
  }
  if (kind == "model") return ContaminationSpec(ModelItself{}, eps);
  throw DomainError("unknown contaminant '" + text + "' (expected point:LOC, lomax:SCALE,INDEX or model)");
}

}  // namespace

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw DomainError("component range must look like A:B");
  const double a = to_double(text.substr(0, colon), "range start");
  const double b = to_double(text.substr(colon + 1), "range end");
  if (a < 0 || b < a || a != std::floor(a) || b != std::floor(b)) throw DomainError("invalid component range " + text);
  return {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
}

int cmd_fit(const RunConfig& config) {
  const auto data = read_data(config.input);
  if (config.weights.size() != 1) throw DomainError("fit takes exactly one weight");
  const auto w = parse_weight(config.weights.front(), data);
  const auto options = fit_options(config);

  std::optional<FitResult> chosen;
  std::optional<std::string> selected_by;
  if (config.j_range) {
    const auto criterion = parse_criterion(config.criterion);
    auto scan = scan_components(data, w, config.j_range->first, config.j_range->second, options, criterion);
    write_text(config.output / "scan.csv", scan_csv(scan));
    std::cout << scan_csv(scan);
    auto flag = [&](const std::optional<std::size_t>& k, const char* name) {
      if (k) std::cout << name << " selects J = " << scan.entries[*k].num_body << '\n';
    };
    flag(scan.best_raic, "raic");
    flag(scan.best_rbic, "rbic");
    flag(scan.best_taic, "taic");
    flag(scan.best_tbic, "tbic");
    if (!scan.selected) throw NumericalError("no component count could be fitted");
    chosen = std::move(*scan.entries[*scan.selected].fit);
    selected_by = to_string(criterion);
  } else {
    chosen = fit(data, w, options);
  }

  const FitResult& result = *chosen;
  std::optional<SandwichPair> sw;
  try {
    sw = sandwich(data, result.params, w);
  } catch (const NumericalError& e) {
    std::cerr << "warning: standard errors unavailable: " << e.what() << '\n';
  }
  FitArtifact art;
  art.fit = &result;
  art.weight = w.to_string();
  art.sandwich = sw;
  art.level = config.level;
  if (sw) {
    try {
      art.intervals = wald_ci(result.params, sw->covariance, config.level);
    } catch (const NumericalError& e) {
      std::cerr << "warning: " << e.what() << '\n';
      art.sandwich.reset();
    }
  }
  art.criteria = criteria(result, art.sandwich, data, w);
  art.selected_by = selected_by;

  write_text(config.output / "params.json", params_to_json(art).dump(2) + "\n");
  write_text(config.output / "trace.csv", trace_csv(result.trace));
  std::cout << "J = " << result.params.num_body() << ", weight " << art.weight << ", method "
            << to_string(result.method) << '\n';
  print_fit(result, art.sandwich);
  return result.converged ? kOk : kNotConverged;
}

int cmd_simulate(const RunConfig& config) {
  ExperimentSpec spec(config.model == "two-body"     ? two_body_benchmark()
                      : config.model == "three-body" ? three_body_benchmark()
                                                     : read_params(config.model));
  if (!config.contaminant.empty()) spec.contamination = parse_contaminant(config.contaminant, config.epsilon);
  const auto options = fit_options(config);
  spec.fit_num_body = options.num_body;
  spec.weight_grid = config.weights;
  spec.n = config.n;
  spec.replications = config.replications;
  spec.seed = config.seed;
  spec.method = options.method;
  spec.theta_mode = options.theta_mode;
  spec.fixed_theta = options.fixed_theta;
  spec.tol = options.tol;
  spec.max_iter = options.max_iter;
  spec.accelerate = options.accelerate;
  spec.init_config = options.init_config;
  spec.threads = config.threads;

  const auto summary = run_experiment(spec);

  std::string s = "weight,parameter,truth,median,mean,sd,bias,mse,fits,failures,not_converged\n";
  for (const auto& ws : summary.weights) {
    for (const auto& p : ws.parameters) {
      s += csv_field(ws.weight) + ',' + p.name + ',' + csv_row({p.truth, p.median, p.mean, p.sd, p.bias, p.mse}) + ',' +
           std::to_string(ws.fits) + ',' + std::to_string(ws.failures) + ',' + std::to_string(ws.not_converged) + '\n';
    }
  }
  write_text(config.output / "summary.csv", s);

  std::string names;
  for (const auto& p : summary.weights.front().parameters) names += ',' + p.name;
  std::string f = "replication,weight,ok,converged,iterations,objective,worst_step" + names + ",error\n";
  for (const auto& r : summary.records) {
    f += std::to_string(r.replication) + ',' + csv_field(r.weight) + ',' + (r.ok ? "1" : "0") + ',' + (r.converged ? "1" : "0") +
         ',' + std::to_string(r.iterations) + ',' + format_number(r.objective) + ',' + format_number(r.worst_step);
    for (std::size_t k = 0; k < summary.weights.front().parameters.size(); ++k) {
      f += ',' + (k < r.estimates.size() ? format_number(r.estimates[k]) : std::string());
    }
    f += ',' + csv_field(r.error) + '\n';
  }
  write_text(config.output / "fits.csv", f);

  for (const auto& ws : summary.weights) {
    const auto& g = ws.parameters.back();
    std::cout << ws.weight << ": " << g.name << " median " << format_number(g.median) << ", sd "
              << format_number(g.sd) << ", mse " << format_number(g.mse) << " (" << ws.failures << " failed, "
              << ws.not_converged << " not converged)\n";
  }
  return kOk;
}

int cmd_toy(const RunConfig& config) {
  const MixtureParams params({1.0}, {}, {}, 1.0, config.toy_index, ThetaMode::fixed);
  const auto gradient = tail_index_gradient(params);
  const ContaminationSpec point(PointMass{0.25});
  const ContaminationSpec lomax(LomaxContaminant{1.0, 4.0});
  std::string out = "phi_tilde,mu_tilde,aeff,if_gamma_point_mass,if_gamma_lomax\n";
  for (double phi : config.phi_grid) {
    for (double mu : config.mu_grid) {
      const auto w = mu == 0.0 ? WeightConfig::unit() : WeightConfig::zig(0.0, mu, phi);
      const double a = aeff(params, w, gradient);
      const double ip = influence_function(params, w, point)(0);
      const double il = influence_function(params, w, lomax)(0);
      out += csv_row({phi, mu, a, ip, il}) + '\n';
    }
  }
  write_text(config.output / "toy.csv", out);
  std::cout << out;
  return kOk;
}

int cmd_diagnose(const RunConfig& config) {
  const auto params = read_params(config.params);
  const auto data = read_data(config.input);
  std::vector<double> sorted(data);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  std::string qq = "level,model_quantile,empirical_quantile\n";
  std::vector<double> levels;
  for (int k = 1; k <= 99; ++k) levels.push_back(k / 100.0);
  for (double l : {0.995, 0.999}) levels.push_back(l);
  for (double q : levels) qq += csv_row({q, mixture_quantile(q, params), empirical_quantile(sorted, q)}) + '\n';
  write_text(config.output / "qq.csv", qq);

  // Log-survival plot at (at most) 2000 evenly spaced order statistics.
  std::string ll = "y,log_y,log_survival_model,log_survival_empirical\n";
  const std::size_t stride = std::max<std::size_t>(1, n / 2000);
  for (std::size_t i = 0; i < n; i += stride) {
    const double y = sorted[i];
    const double emp = static_cast<double>(n - i) / static_cast<double>(n + 1);
    ll += csv_row({y, std::log(y), std::log(mixture_sf(y, params)), std::log(emp)}) + '\n';
  }
  write_text(config.output / "loglog.csv", ll);

  std::string me = "level,threshold,mean_excess_model,mean_excess_empirical\n";
  const bool finite_mean = params.tail_weight() == 0.0 || params.tail_index() > 1.0;
  for (int k = 50; k <= 99; ++k) {
    const double level = k / 100.0;
    const double u = empirical_quantile(sorted, level);
    double sum = 0.0;
    std::size_t count = 0;
    for (double y : sorted) {
      if (y > u) {
        sum += y - u;
        ++count;
      }
    }
    const double empirical = count ? sum / static_cast<double>(count) : std::nan("");
    const double survival = mixture_sf(u, params);
    const double model = finite_mean && survival > 0.0 ? (partial_expectation(params, u) - u * survival) / survival
                                                       : std::nan("");
    me += csv_row({level, u, model, empirical}) + '\n';
  }
  write_text(config.output / "mean_excess.csv", me);

  std::string risk = "level,var_model,cte_model,var_empirical,cte_empirical,cte_model_available,few_exceedances\n";
  for (double q : {0.5, 0.75, 0.95, 0.99, 0.995, 0.9975, 0.9995}) {
    const auto model = var_cte(params, q);
    const auto emp = empirical_var_cte(data, q);
    risk += format_number(q) + ',' + format_number(model.var) + ',' + optional_number(model.cte) + ',' +
            format_number(emp.var) + ',' + format_number(emp.cte) + ',' + (model.cte ? "1" : "0") + ',' +
            (emp.few_exceedances ? "1" : "0") + '\n';
  }
  write_text(config.output / "risk.csv", risk);
  std::cout << risk;
  return kOk;
}

}  // namespace mwle::cli
