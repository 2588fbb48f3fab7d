#include <gtest/gtest.h>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "commands.hpp"
#include "io.hpp"
#include "mwle/error.hpp"
#include "mwle/simulation.hpp"

using namespace mwle;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mwle_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(MWLE_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_data(const fs::path& dir, const std::vector<double>& data, bool header = true) {
  const auto path = dir / "data.csv";
  std::ofstream out(path);
  if (header) out << "y\n";
  for (double y : data) out << cli::format_number(y) << '\n';
  return path;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

double number(const std::string& s) {
  double v = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

}  // namespace

TEST(DataFile, HeaderBlankLinesAndPlainNumbers) {
  EXPECT_EQ(cli::parse_data("y\n1.5\n\n2\n"), (std::vector<double>{1.5, 2.0}));
  EXPECT_EQ(cli::parse_data("3\n4e2\n"), (std::vector<double>{3.0, 400.0}));
}

TEST(DataFile, BadRowReportsLineNumber) {
  try {
    cli::parse_data("y\n1\nabc\n3\n");
    FAIL() << "expected a parse error";
  } catch (const cli::ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(DataFile, NonPositiveValuesAreCounted) {
  try {
    cli::parse_data("1\n-2\n0\n5\n");
    FAIL() << "expected a domain error";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(Formatting, ShortestRoundTrip) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-300.0, 300.0);
  for (int k = 0; k < 1000; ++k) {
    const double x = std::pow(10.0, u(gen));
    EXPECT_EQ(number(cli::format_number(x)), x);
  }
  EXPECT_EQ(cli::format_number(0.25), "0.25");
  EXPECT_EQ(cli::csv_row({1.0, 0.5}), "1,0.5");
}

TEST(ParamsJson, RoundTripIsExact) {
  const auto data = sample(two_body_benchmark(), 1000, 2);
  FitOptions o;
  o.max_iter = 30;
  const auto f = fit(data, WeightConfig::unit(), o);
  cli::FitArtifact art;
  art.fit = &f;
  art.weight = "unit";
  const auto j = cli::params_to_json(art);
  EXPECT_EQ(cli::params_from_json(nlohmann::json::parse(j.dump())), f.params);
  for (const char* key : {"pi", "mu", "phi", "theta", "gamma", "iterations", "converged", "effective_n"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST(Range, Parsing) {
  EXPECT_EQ(cli::parse_range("1:6"), (std::pair<std::size_t, std::size_t>{1, 6}));
  EXPECT_THROW(cli::parse_range("6:1"), std::exception);
  EXPECT_THROW(cli::parse_range("x"), std::exception);
}

TEST(Binary, ExitCodes) {
  const auto dir = scratch("codes");
  const auto good = write_data(dir, sample(two_body_benchmark(), 2000, 3));
  std::ofstream(dir / "bad.csv") << "y\n1\nnope\n";
  std::ofstream(dir / "neg.csv") << "y\n1\n-1\n";
  EXPECT_EQ(run(""), cli::kUsage);
  EXPECT_EQ(run("--help"), cli::kOk);
  EXPECT_EQ(run("fit " + (dir / "missing.csv").string()), cli::kUsage);
  EXPECT_EQ(run("fit " + (dir / "bad.csv").string() + " -o " + dir.string()), cli::kParse);
  EXPECT_EQ(run("fit " + (dir / "neg.csv").string() + " -o " + dir.string()), cli::kDomain);
  EXPECT_EQ(run("fit " + good.string() + " -w bogus -o " + dir.string()), cli::kDomain);
  EXPECT_EQ(run("fit " + good.string() + " --max-iter 2 -o " + dir.string()), cli::kNotConverged);
  EXPECT_EQ(run("fit " + good.string() + " --theta fixed:1000 -o " + dir.string()), cli::kOk);
}

TEST(Binary, FitIsDeterministicAndMatchesLibrary) {
  const auto dir = scratch("fit");
  const auto data = sample(two_body_benchmark(), 3000, 4);
  const auto path = write_data(dir, data);
  ASSERT_EQ(run("fit " + path.string() + " -w unit -J 2 -o " + (dir / "a").string()), cli::kOk);
  ASSERT_EQ(run("fit " + path.string() + " -w unit -J 2 -o " + (dir / "b").string()), cli::kOk);
  EXPECT_EQ(slurp(dir / "a" / "params.json"), slurp(dir / "b" / "params.json"));

  FitOptions o;
  const auto f = fit(data, WeightConfig::unit(), o);
  EXPECT_EQ(cli::read_params(dir / "a" / "params.json"), f.params);
  const auto trace = read_csv(dir / "a" / "trace.csv");
  EXPECT_EQ(trace.front(), (std::vector<std::string>{"iteration", "objective", "delta_rel"}));
}

TEST(Binary, SelectWritesScanTable) {
  const auto dir = scratch("select");
  const auto path = write_data(dir, sample(two_body_benchmark(), 2000, 5), false);
  ASSERT_EQ(run("select " + path.string() + " --J-range 1:3 --theta fixed:1000 -o " + dir.string()), cli::kOk);
  const auto rows = read_csv(dir / "scan.csv");
  ASSERT_EQ(rows.size(), 4u);
  std::size_t best = 1;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (number(rows[r][8]) < number(rows[best][8])) best = r;
  }
  const auto chosen = cli::read_params(dir / "params.json");
  EXPECT_EQ(chosen.num_body(), static_cast<std::size_t>(number(rows[best][0])));
}

TEST(Binary, ToyCurvesStartAtFullEfficiency) {
  const auto dir = scratch("toy");
  ASSERT_EQ(run("toy --mu-grid 0 1 5 --phi-grid 0.5 -o " + dir.string()), cli::kOk);
  const auto rows = read_csv(dir / "toy.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1][2], "1");
  EXPECT_GT(number(rows[1][2]), number(rows[2][2]));
  EXPECT_GT(number(rows[2][2]), number(rows[3][2]));
}

TEST(Binary, DiagnoseSelfFit) {
  const auto dir = scratch("diagnose");
  const auto truth = two_body_benchmark();
  const auto data = sample(truth, 10000, 6);
  const auto path = write_data(dir, data);
  ASSERT_EQ(run("fit " + path.string() + " --theta fixed:1000 -o " + dir.string()), cli::kOk);
  ASSERT_EQ(run("diagnose " + path.string() + " -p " + (dir / "params.json").string() + " -o " + dir.string()), cli::kOk);
  const auto fitted = cli::read_params(dir / "params.json");

  const auto qq = read_csv(dir / "qq.csv");
  for (std::size_t r = 1; r < qq.size(); ++r) {
    const double level = number(qq[r][0]), model = number(qq[r][1]), emp = number(qq[r][2]);
    EXPECT_NEAR(mixture_cdf(model, fitted), level, 1e-9);
    // 5% band, widened to three standard errors of the order statistic where
    // the sample is too thin in the tail for 5% to be meaningful.
    const double se = std::sqrt(level * (1.0 - level) / data.size()) / mixture_pdf(model, fitted);
    if (level >= 0.05 && level <= 0.995) EXPECT_NEAR(model, emp, std::max(0.05 * emp, 3.0 * se)) << level;
  }
  const auto risk = read_csv(dir / "risk.csv");
  ASSERT_EQ(risk.size(), 8u);
  for (std::size_t r = 1; r < risk.size(); ++r) {
    const auto e = empirical_var_cte(data, number(risk[r][0]));
    EXPECT_EQ(number(risk[r][3]), e.var);
    EXPECT_EQ(number(risk[r][4]), e.cte);
  }
  for (const char* f : {"loglog.csv", "mean_excess.csv"}) EXPECT_TRUE(fs::exists(dir / f));
}

TEST(Binary, SimulateQuotesWeightSpecs) {
  const auto dir = scratch("simulate");
  ASSERT_EQ(run("simulate -n 600 -r 2 -w unit -w zig:0.1,q0.9,0.5 --threads 1 -o " + dir.string()), cli::kOk);
  const auto text = slurp(dir / "fits.csv");
  EXPECT_NE(text.find("\"zig:"), std::string::npos);
  const auto summary = slurp(dir / "summary.csv");
  EXPECT_EQ(summary.rfind("weight,parameter,truth,median,mean,sd,bias,mse,fits,failures,not_converged\n", 0), 0u);
}
