#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "io.hpp"
#include "mwle/error.hpp"
#include "mwle/gem.hpp"

namespace {

using mwle::cli::RunConfig;

void add_fit_options(CLI::App* sub, RunConfig& c, std::string& range) {
  sub->add_option("input", c.input, "Loss data: one positive value per line, optional header 'y'")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("-o,--output", c.output, "Output directory")->capture_default_str();
  sub->add_option("-J,--num-body", c.num_body, "Number of gamma body components")->capture_default_str();
  sub->add_option("--J-range", range, "Scan component counts A:B and keep the best by --criterion");
  sub->add_option("--criterion", c.criterion, "raic, rbic, taic or tbic")->capture_default_str();
  sub->add_option("-w,--weight", c.weights, "Weight: unit | step:T | expcdf:L | twopoint:L,F | zig:X,L,P (L may be qA)")
      ->expected(1);
  sub->add_option("-m,--method", c.method, "GEM variant: M1 or M2")->capture_default_str();
  sub->add_option("--theta", c.theta, "Tail scale: estimated | fixed:V")->capture_default_str();
  sub->add_option("--tau", c.tau, "Initialization threshold: auto | qA | value")->capture_default_str();
  sub->add_option("--seed", c.seed, "Initialization seed")->capture_default_str();
  sub->add_option("--tol", c.tol, "Convergence tolerance on the mean relative change")->capture_default_str();
  sub->add_option("--max-iter", c.max_iter, "Iteration cap")->capture_default_str();
  sub->add_flag("--no-accelerate", c.no_accelerate, "Disable step extrapolation");
  sub->add_option("--level", c.level, "Confidence level")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum weighted likelihood fitting of gamma-body / Lomax-tail mixtures"};
  app.require_subcommand(1);
  RunConfig c;
  std::string range;

  auto* fit = app.add_subcommand("fit", "Fit one model; writes params.json and trace.csv");
  add_fit_options(fit, c, range);
  auto* select = app.add_subcommand("select", "Fit J over a range and pick one by a robust criterion");
  add_fit_options(select, c, range);

  auto* sim = app.add_subcommand("simulate", "Monte Carlo study; writes summary.csv and fits.csv");
  sim->add_option("-o,--output", c.output, "Output directory")->capture_default_str();
  sim->add_option("--model", c.model, "two-body | three-body | path to params.json")->capture_default_str();
  sim->add_option("-J,--num-body", c.num_body, "Body components in the fitted model")->capture_default_str();
  sim->add_option("-w,--weight", c.weights, "Weight grid (repeatable)");
  sim->add_option("-m,--method", c.method, "GEM variant: M1 or M2")->capture_default_str();
  sim->add_option("--theta", c.theta, "Tail scale: estimated | fixed | fixed:V")->default_str("fixed");
  sim->add_option("--tau", c.tau, "Initialization threshold: auto | qA | value")->capture_default_str();
  sim->add_option("-n,--sample-size", c.n, "Observations per replication")->capture_default_str();
  sim->add_option("-r,--replications", c.replications, "Replications")->capture_default_str();
  sim->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  sim->add_option("--threads", c.threads, "Worker threads (0: MWLE_THREADS or all cores)")->capture_default_str();
  sim->add_option("--contaminant", c.contaminant, "point:LOC | lomax:SCALE,INDEX | model");
  sim->add_option("--epsilon", c.epsilon, "Contamination probability")->capture_default_str();
  sim->add_option("--tol", c.tol, "Convergence tolerance")->capture_default_str();
  sim->add_option("--max-iter", c.max_iter, "Iteration cap")->capture_default_str();
  sim->add_flag("--no-accelerate", c.no_accelerate, "Disable step extrapolation");

  auto* toy = app.add_subcommand("toy", "Efficiency and influence curves for a unit Lomax; writes toy.csv");
  toy->add_option("-o,--output", c.output, "Output directory")->capture_default_str();
  toy->add_option("--mu-grid", c.mu_grid, "Weight locations (0 means unit weight)");
  toy->add_option("--phi-grid", c.phi_grid, "Weight dispersions");
  toy->add_option("--index", c.toy_index, "Lomax tail index")->capture_default_str();

  auto* diag = app.add_subcommand("diagnose", "Goodness-of-fit tables and risk measures for a fitted model");
  diag->add_option("input", c.input, "Loss data")->required()->check(CLI::ExistingFile);
  diag->add_option("-p,--params", c.params, "params.json from fit")->required()->check(CLI::ExistingFile);
  diag->add_option("-o,--output", c.output, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? mwle::cli::kOk : mwle::cli::kUsage;
  }

  try {
    if (!range.empty()) c.j_range = mwle::cli::parse_range(range);
    if (*fit || *select) {
      if (*select && !c.j_range) throw CLI::ValidationError("select needs --J-range");
      return mwle::cli::cmd_fit(c);
    }
    if (*sim) {
      if (sim->count("--theta") == 0) c.theta = "fixed";
      return mwle::cli::cmd_simulate(c);
    }
    if (*toy) return mwle::cli::cmd_toy(c);
    if (*diag) return mwle::cli::cmd_diagnose(c);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mwle::cli::kUsage;
  } catch (const mwle::cli::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return mwle::cli::kParse;
  } catch (const mwle::DomainError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return mwle::cli::kDomain;
  } catch (const mwle::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return mwle::cli::kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return mwle::cli::kIo;
  }
  return mwle::cli::kUsage;
}
