#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mwle::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kDomain = 3,
  kNumerical = 4,
  kNotConverged = 5,
  kIo = 6,
};

struct RunConfig {
  std::string command;
  std::filesystem::path input;
  std::filesystem::path output = ".";
  std::filesystem::path params;  // diagnose

  std::size_t num_body = 2;
  std::optional<std::pair<std::size_t, std::size_t>> j_range;
  std::string criterion = "tbic";
  std::vector<std::string> weights{"unit"};
  std::string method = "M2";
  std::string theta = "estimated";  // "estimated", "fixed", "fixed:V" or "V"
  std::string tau = "auto";         // "auto", "qA" or a value
  std::uint64_t seed = 20240601;
  double tol = 1e-5;
  int max_iter = 1000;
  bool no_accelerate = false;
  double level = 0.95;

  // simulate
  std::string model = "two-body";  // "two-body", "three-body" or a params.json path
  std::size_t n = 10000;
  int replications = 20;
  int threads = 0;
  std::string contaminant;  // "point:LOC" or "lomax:SCALE,INDEX"
  double epsilon = 0.0;

  // toy
  std::vector<double> mu_grid{0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0};
  std::vector<double> phi_grid{0.1, 0.2, 0.5, 1.0};
  double toy_index = 1.0;
};

std::pair<std::size_t, std::size_t> parse_range(const std::string& text);

int cmd_fit(const RunConfig& config);
int cmd_simulate(const RunConfig& config);
int cmd_toy(const RunConfig& config);
int cmd_diagnose(const RunConfig& config);

}  // namespace mwle::cli
