#include "io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>

#include "mwle/error.hpp"

namespace mwle::cli {
namespace {

std::string trim(const std::string& s) {
  const auto first = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
  const auto last = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
  return first < last ? std::string(first, last) : std::string();
}

std::vector<double> numbers(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw ParseError(std::string("params: missing array '") + key + "'");
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) throw ParseError(std::string("params: non-numeric entry in '") + key + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

double number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) throw ParseError(std::string("params: missing number '") + key + "'");
  return j.at(key).get<double>();
}

}  // namespace

std::vector<double> parse_data(const std::string& text, const std::string& source) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  bool seen_content = false;
  std::size_t non_positive = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (!seen_content) {
      seen_content = true;
      std::string lower(line);
      std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
      if (lower == "y" || lower == "\"y\"") continue;
    }
    double value = 0.0;
    const char* begin = line.data();
    const char* end = begin + line.size();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": cannot parse '" + line + "' as a number", line_no);
    }
    if (!(value > 0.0) || !std::isfinite(value)) ++non_positive;
    out.push_back(value);
  }
  if (non_positive > 0) {
    throw DomainError(source + ": " + std::to_string(non_positive) +
                      " value(s) are not positive finite numbers; losses must be > 0");
  }
  if (out.empty()) throw ParseError(source + ": no observations");
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> read_data(const std::filesystem::path& path) { return parse_data(read_text(path), path.string()); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string format_number(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

std::string csv_row(const std::vector<double>& values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) out += ',';
    out += format_number(values[k]);
  }
  return out;
}

std::string trace_csv(const std::vector<TraceEntry>& trace) {
  std::string out = "iteration,objective,delta_rel\n";
  for (const auto& t : trace) {
    out += std::to_string(t.iteration) + ',' + format_number(t.objective) + ',' + format_number(t.delta_rel) + '\n';
  }
  return out;
}

nlohmann::ordered_json params_to_json(const FitArtifact& a) {
  const FitResult& f = *a.fit;
  const MixtureParams& p = f.params;
  nlohmann::ordered_json j;
  j["J"] = p.num_body();
  j["method"] = to_string(f.method);
  j["weight"] = a.weight;
  j["theta_mode"] = p.theta_estimated() ? "estimated" : "fixed";
  j["pi"] = std::vector<double>(p.weights().begin(), p.weights().end());
  j["mu"] = std::vector<double>(p.body_means().begin(), p.body_means().end());
  j["phi"] = std::vector<double>(p.body_dispersions().begin(), p.body_dispersions().end());
  j["theta"] = p.tail_scale();
  j["gamma"] = p.tail_index();
  if (f.pi_star) j["pi_star"] = *f.pi_star;
  j["parameter_names"] = p.free_parameter_names();
  j["estimates"] = p.free_parameters();
  if (a.sandwich) {
    j["std_errors"] = standard_errors(a.sandwich->covariance);
    j["ci_level"] = a.level;
    std::vector<double> lo, hi;
    for (const auto& iv : a.intervals) {
      lo.push_back(iv.lower);
      hi.push_back(iv.upper);
    }
    j["ci_lower"] = lo;
    j["ci_upper"] = hi;
  } else {
    j["std_errors"] = nullptr;
  }
  if (a.criteria) {
    const auto& c = *a.criteria;
    nlohmann::ordered_json cj;
    cj["raic"] = c.raic ? nlohmann::ordered_json(*c.raic) : nlohmann::ordered_json(nullptr);
    cj["rbic"] = c.rbic ? nlohmann::ordered_json(*c.rbic) : nlohmann::ordered_json(nullptr);
    cj["taic"] = c.taic;
    cj["tbic"] = c.tbic;
    cj["effective_parameters"] =
        c.effective_parameters ? nlohmann::ordered_json(*c.effective_parameters) : nlohmann::ordered_json(nullptr);
    if (!c.note.empty()) cj["note"] = c.note;
    j["criteria"] = cj;
  }
  if (a.selected_by) j["selected_by"] = *a.selected_by;
  j["objective"] = f.objective.value;
  j["effective_n"] = f.objective.effective_n;
  j["n"] = f.objective.contributions.size();
  j["iterations"] = f.iterations;
  j["converged"] = f.converged;
  j["warnings"] = f.warnings;
  return j;
}

MixtureParams params_from_json(const nlohmann::json& j) {
  const auto pi = numbers(j, "pi");
  const auto mu = numbers(j, "mu");
  const auto phi = numbers(j, "phi");
  ThetaMode mode = ThetaMode::estimated;
  if (j.contains("theta_mode")) {
    const auto m = j.at("theta_mode").get<std::string>();
    if (m == "fixed") {
      mode = ThetaMode::fixed;
    } else if (m != "estimated") {
      throw ParseError("params: theta_mode must be 'fixed' or 'estimated'");
    }
  }
  return MixtureParams(pi, mu, phi, number(j, "theta"), number(j, "gamma"), mode);
}

MixtureParams read_params(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return params_from_json(j);
}

}  // namespace mwle::cli
