#pragma once

// File formats of the command-line tool: single-column loss data, JSON
// parameter artifacts and CSV tables.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mwle/asymptotics.hpp"
#include "mwle/gem.hpp"
#include "mwle/selection.hpp"

namespace mwle::cli {

// Malformed input file; line is 1-based (0 when not tied to a line).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0) : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Reads a CSV with header "y" or plain newline-separated numbers.  Blank
// lines are skipped.  Non-positive values raise DomainError with a count.
std::vector<double> parse_data(const std::string& text, const std::string& source = "input");
std::vector<double> read_data(const std::filesystem::path& path);

// Shortest representation that parses back to the same double.
std::string format_number(double x);

// Everything written to params.json.
struct FitArtifact {
  const FitResult* fit = nullptr;
  std::string weight;
  std::optional<SandwichPair> sandwich;
  std::vector<Interval> intervals;
  double level = 0.95;
  std::optional<CriteriaReport> criteria;
  std::optional<std::string> selected_by;
};

nlohmann::ordered_json params_to_json(const FitArtifact& a);
MixtureParams params_from_json(const nlohmann::json& j);
MixtureParams read_params(const std::filesystem::path& path);

std::string trace_csv(const std::vector<TraceEntry>& trace);

// Comma-joined row of formatted numbers.
std::string csv_row(const std::vector<double>& values);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace mwle::cli
