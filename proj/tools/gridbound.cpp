// gridbound command-line front end: bounds, simulate, verify.
//
// Exit codes: 0 success, 1 domain error or failed property, 2 usage error.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "gridbound/bounds.hpp"
#include "gridbound/error.hpp"
#include "gridbound/io.hpp"
#include "gridbound/logging.hpp"
#include "gridbound/sim.hpp"

namespace fs = std::filesystem;
using namespace gridbound;

namespace {

constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

struct Common {
  std::uint64_t seed = 0;
  int jobs = 0;
};

struct BoundsArgs {
  std::string network, forecast, model = "gaussian", window = "remaining", out;
  double epsilon = 0.05;
};

struct SimulateArgs {
  std::string config, out_dir = ".";
};

struct VerifyArgs {
  std::string property, config, out;
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

// foo/cov.csv -> foo/cov.hindsight.csv
fs::path hindsight_path(const fs::path& out) {
  fs::path p = out;
  return p.replace_extension(".hindsight.csv");
}

ExperimentConfig resolved_config(const std::string& path, const Common& common) {
  ExperimentConfig config = load_experiment_config(path);
  config.seed = common.seed;
  spdlog::info("config {}: {}", path, experiment_config_to_json(config).dump());
  spdlog::info("seed {}", config.seed);
  return config;
}

int run_bounds(const BoundsArgs& a, const Common& common) {
  spdlog::info("bounds: network={} forecast={} epsilon={} model={} window={} seed={}", a.network, a.forecast,
               a.epsilon, a.model, a.window, common.seed);
  const auto network = std::make_shared<const Network>(load_network(a.network));
  const NetloadForecast forecast = load_forecast(a.forecast, network->bus_count());
  const UncertaintyModel model = load_model(a.model, forecast);
  const BoundWindow window = parse_window(a.window);

  const DispatchSolution ced = solve_dispatch(build_ced(network, forecast, a.epsilon, model, forecast.horizon()));
  if (!ced.optimal()) throw SolveError(std::string("CED is ") + qp::to_string(ced.status));
  const BidBounds bounds = bounds_from_ced(ced, *network, a.epsilon, window);

  auto out = open_output(a.out);
  write_bounds_csv(out, bounds, *network);

  std::printf("%-12s %10s %10s %10s %10s\n", "storage", "A_bar min", "A_bar max", "B_bar min", "B_bar max");
  for (int s = 0; s < bounds.storage_count(); ++s) {
    const std::string& name = network->storages[s].name;
    std::printf("%-12s %10.4f %10.4f %10.4f %10.4f\n", (name.empty() ? std::to_string(s) : name).c_str(),
                bounds.discharge_cap.row(s).minCoeff(), bounds.discharge_cap.row(s).maxCoeff(),
                bounds.charge_cap.row(s).minCoeff(), bounds.charge_cap.row(s).maxCoeff());
  }
  return 0;
}

void print_report(const MetricsReport& report) {
  std::printf("%-9s %-9s | %-46s | %-46s\n", "", "", "system cost ($)", "storage profit ($)");
  std::printf("%-9s %-9s | %11s %11s %11s %8s | %11s %11s %11s %8s\n", "withhold", "uncert", "without", "with",
              "delta", "delta%", "without", "with", "delta", "delta%");
  for (const auto& g : report.groups) {
    std::printf("%-9.2f %-9.2f | %11.2f %11.2f %11.4f %8.3f | %11.2f %11.2f %11.4f %8.3f\n", g.withholding_scale,
                g.uncertainty_scale, g.cost_without.mean, g.cost_with.mean, g.cost_delta, g.cost_delta_pct,
                g.profit_without.mean, g.profit_with.mean, g.profit_delta, g.profit_delta_pct);
    if (g.failed_without || g.failed_with) {
      std::printf("failed trials: %d without bounds, %d with bounds (of %d)\n", g.failed_without, g.failed_with,
                  g.trials);
    }
  }
}

int run_simulate(const SimulateArgs& a, const Common& common) {
  const ExperimentConfig config = resolved_config(a.config, common);
  const ExperimentInputs inputs = load_inputs(config);
  const ExperimentResult result = run_experiment(config, inputs, common.jobs);

  const fs::path dir(a.out_dir);
  auto metrics = open_output(dir / "metrics.csv");
  write_metrics_csv(metrics, result.records);
  auto bids = open_output(dir / "bids.csv");
  write_bids_csv(bids, result.records, *inputs.network);
  auto summary = open_output(dir / "summary.csv");
  write_summary_csv(summary, result.report);
  auto report = open_output(dir / "report.json");
  report << report_to_json(result.report, config).dump(2) << '\n';
  print_report(result.report);
  return 0;
}

int run_verify(const VerifyArgs& a, const Common& common) {
  const ExperimentConfig config = resolved_config(a.config, common);
  const ExperimentInputs inputs = load_inputs(config);
  auto out = open_output(a.out);

  if (a.property == "coverage") {
    const BidBounds bounds = coverage_bounds(config, inputs);
    const CoverageResult c =
        verify_coverage(inputs, bounds, config.coverage_samples, config.seed, config.window, common.jobs);
    write_coverage_csv(out, c, *inputs.network);
    const BidBounds benchmark = deterministic_bounds(
        clear_day_ahead(inputs.network, inputs.forecast.mean), *inputs.network, inputs.forecast.horizon());
    auto hindsight = open_output(hindsight_path(a.out));
    write_hindsight_csv(hindsight, c, bounds, &benchmark);
    const double threshold = coverage_threshold(config.epsilon, config.coverage_samples);
    std::printf("coverage %.4f over %d interior storage-periods (%d samples, %d failed); threshold %.4f\n",
                c.fraction(), c.total_all, c.samples, c.failed_samples, threshold);
    if (c.fraction() < threshold) {
      std::fprintf(stderr, "coverage %.4f below %.4f\n", c.fraction(), threshold);
      return kDomainError;
    }
    return 0;
  }

  const SweepAxis axis = parse_sweep_axis(a.property);
  std::vector<double> grid;
  switch (axis) {
    case SweepAxis::Soc:
      for (int k = 0; k < config.sweeps.soc_points; ++k) grid.push_back(k / double(config.sweeps.soc_points - 1));
      break;
    case SweepAxis::Sigma: grid = config.sweeps.sigma; break;
    case SweepAxis::Epsilon: grid = config.sweeps.epsilon; break;
  }
  const SweepResult sweep = verify_monotonicity(config, inputs, axis, grid);
  write_sweep_csv(out, sweep);
  if (!sweep.holds) {
    std::fprintf(stderr, "counterexample: %s\n", sweep.counterexample.c_str());
    return kDomainError;
  }
  std::printf("%s sweep holds over %zu points\n", to_string(axis), grid.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();

  CLI::App app{"Chance-constrained storage bid bounds: compute, simulate, verify"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "Seed for every random stream")->capture_default_str();
  app.add_option("--jobs", common.jobs, "Worker threads (0 = all cores)")->capture_default_str()->check(CLI::NonNegativeNumber);

  BoundsArgs bounds;
  auto* cmd_bounds = app.add_subcommand("bounds", "Bid bounds from the chance-constrained dispatch");
  cmd_bounds->add_option("--network", bounds.network, "Network JSON")->required()->check(CLI::ExistingFile);
  cmd_bounds->add_option("--forecast", bounds.forecast, "Forecast CSV node,t,mu,sigma")->required()->check(CLI::ExistingFile);
  cmd_bounds->add_option("--epsilon", bounds.epsilon, "Violation probability")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  cmd_bounds->add_option("--model", bounds.model, "Uncertainty model spec")->capture_default_str();
  cmd_bounds->add_option("--window", bounds.window, "Extremum window")->capture_default_str()->check(CLI::IsMember({"remaining", "full"}));
  cmd_bounds->add_option("--out", bounds.out, "Output CSV")->required();

  SimulateArgs simulate;
  auto* cmd_simulate = app.add_subcommand("simulate", "Agent-based experiment with and without caps");
  cmd_simulate->add_option("--config", simulate.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  cmd_simulate->add_option("--seed", common.seed, "Seed for every random stream");
  cmd_simulate->add_option("--out-dir", simulate.out_dir, "Directory for metrics.csv and report.json")->capture_default_str();
  cmd_simulate->add_option("--jobs", common.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  VerifyArgs verify;
  auto* cmd_verify = app.add_subcommand("verify", "Check coverage or a monotonicity property");
  cmd_verify->add_option("--property", verify.property, "coverage, soc, sigma or epsilon")
      ->required()
      ->check(CLI::IsMember({"coverage", "soc", "sigma", "epsilon"}));
  cmd_verify->add_option("--config", verify.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  cmd_verify->add_option("--out", verify.out, "Output CSV")->required();
  cmd_verify->add_option("--seed", common.seed, "Seed for every random stream");
  cmd_verify->add_option("--jobs", common.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*cmd_bounds) return run_bounds(bounds, common);
    if (*cmd_simulate) return run_simulate(simulate, common);
    return run_verify(verify, common);
  } catch (const gridbound::Error& e) {
    spdlog::error("{}", e.what());
    return kDomainError;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return kDomainError;
  }
}
