#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridbound/agent.hpp"
#include "gridbound/bounds.hpp"
#include "gridbound/dispatch.hpp"
#include "gridbound/grid.hpp"
#include "gridbound/uncertainty.hpp"

namespace gridbound {

/// Per-storage agent settings; storages without an entry bid at scale 0.
struct AgentSpec {
  int storage_id = 0;
  double withholding_scale = 0.0;
  int grid_points = 101;
  int quadrature_nodes = 7;
};

/// Where the caps in the with-bounds run come from.
enum class BoundMode { CedDual, LmpAnticipated, Deterministic, None };
BoundMode parse_bound_mode(const std::string& text);
const char* to_string(BoundMode mode);

struct SweepGrids {
  int soc_points = 11;
  std::vector<double> sigma{0.0, 0.5, 1.0, 2.0, 3.0};
  std::vector<double> epsilon{0.01, 0.05, 0.10, 0.15, 0.5};
};

struct ExperimentConfig {
  std::filesystem::path network_file;
  std::filesystem::path profile_file;  // node,t,mu,sigma
  double epsilon = 0.05;
  std::string model = "gaussian";
  double sigma_multiplier = 1.0;
  std::vector<AgentSpec> agents;
  int da_scenarios = 10;
  int rt_samples = 100;
  int horizon = 24;
  std::uint64_t seed = 0;
  ComplementarityMode complementarity = ComplementarityMode::Relaxed;
  BoundMode bounds = BoundMode::CedDual;
  BoundWindow window = BoundWindow::Remaining;
  /// Re-solve the CED every real-time hour at the realized SoC.
  bool rolling = false;
  /// Uniform g_max multiplier for scarcity studies.
  double generation_scale = 1.0;
  int coverage_samples = 500;
  SweepGrids sweeps;
};

/// Relative paths in the file resolve against the file's directory. The
/// seed is not part of the file.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig experiment_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

/// Network, forecast and model loaded from a config.
struct ExperimentInputs {
  std::shared_ptr<const Network> network;
  NetloadForecast base;      // profile as read
  NetloadForecast forecast;  // sigma times the configured multiplier
  UncertaintyModel model;
};
ExperimentInputs load_inputs(const ExperimentConfig& config);
/// Applies generation_scale and sigma_multiplier to in-memory data.
ExperimentInputs make_inputs(Network network, NetloadForecast base, UncertaintyModel model, const ExperimentConfig& config);

/// DA scenario k is the base mean times a factor drawn from U[0.9, 1.1];
/// its RT samples add sigma * Z. Streams are keyed by (seed, k, j).
ScenarioSet generate_scenarios(const NetloadForecast& forecast, const UncertaintyModel& model, int da_count, int rt_count,
                               std::uint64_t seed);

/// LMPs [bus][t] of the OED on the DA mean. Throws SolveError naming the
/// scenario when it is not optimal.
Eigen::MatrixXd clear_day_ahead(std::shared_ptr<const Network> network, const Eigen::MatrixXd& da_netload,
                                int scenario_id = 0);

struct TrialRecord {
  int da_scenario = 0;
  int rt_sample = 0;
  bool with_bounds = false;
  std::string bounds_mode = "none";
  bool failed = false;
  std::string failure;
  double system_cost = 0.0;
  Eigen::VectorXd storage_profit;  // per storage
  double total_profit = 0.0;
  int capped_periods = 0;  // storage-periods where a cap changed the offer
  // [entity][t]
  Eigen::MatrixXd g, p, b, soc, lmp;
  Eigen::MatrixXd first_discharge_bid, first_charge_bid;
};

/// One real-time day of sequential SED clearing with one agent per storage
/// (agents[s].storage == s); SoCs start at e_initial. `bounds` caps the
/// offers when given. `rolling_bounds`, if set, replaces `bounds` and is
/// asked for every storage's caps at each period.
using RollingBounds = std::function<std::vector<BoundRow>(int t, const Eigen::VectorXd& soc)>;
TrialRecord run_realtime_day(std::shared_ptr<const Network> network, const Eigen::MatrixXd& rt_netload,
                             std::vector<StorageAgent> agents, const BidBounds* bounds,
                             ComplementarityMode mode = ComplementarityMode::Relaxed,
                             const RollingBounds& rolling_bounds = {});

struct Summary {
  int count = 0;
  double mean = 0.0;
  double p5 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};
Summary summarize(std::vector<double> values);

struct MetricsGroup {
  double withholding_scale = 0.0;
  double uncertainty_scale = 0.0;
  int trials = 0;
  int failed_without = 0;
  int failed_with = 0;
  Summary cost_without, cost_with, profit_without, profit_with;
  double cost_delta = 0.0, cost_delta_pct = 0.0;
  double profit_delta = 0.0, profit_delta_pct = 0.0;
};

struct MetricsReport {
  std::vector<MetricsGroup> groups;
};

/// Aggregates from the stored records only.
MetricsReport build_report(const std::vector<TrialRecord>& records, double withholding_scale, double uncertainty_scale);

struct ExperimentResult {
  std::vector<TrialRecord> records;  // ordered by (da, rt, without/with)
  MetricsReport report;
};

/// Full DA x RT x {without, with bounds} cross. `jobs` <= 0 uses all cores.
ExperimentResult run_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs, int jobs = 0);

void write_metrics_csv(std::ostream& out, const std::vector<TrialRecord>& records);
/// Long format, one row per (trial, storage, period): offers as cleared
/// (after any caps), dispatch, SoC and LMP at the storage bus.
void write_bids_csv(std::ostream& out, const std::vector<TrialRecord>& records, const Network& network);
/// One row per report group; rows from runs over a grid of scales stack.
void write_summary_csv(std::ostream& out, const MetricsReport& report);
nlohmann::json report_to_json(const MetricsReport& report, const ExperimentConfig& config);

/// Bounds for one DA scenario per the configured mode (empty for None).
std::optional<BidBounds> scenario_bounds(const ExperimentConfig& config, const ExperimentInputs& inputs,
                                         const Eigen::MatrixXd& da_mean, const Eigen::MatrixXd& da_lmp);

/// One storage-period of one hindsight OED sample.
struct HindsightPoint {
  int sample = 0;
  int storage = 0;
  int t = 0;  // 0-based
  bool interior = false;
  double discharge_cost = 0.0;      // A[t]
  double charge_cost = 0.0;         // B[t]
  double window_charge_cost = 0.0;  // min of B over the bound's window
};

struct CoverageResult {
  std::vector<int> covered;  // per storage, both sides under their caps
  std::vector<int> total;
  std::vector<int> discharge_covered, charge_covered;
  int samples = 0;
  int failed_samples = 0;
  int covered_all = 0;
  int total_all = 0;
  std::vector<HindsightPoint> points;  // ordered by (sample, storage, t)
  double fraction() const { return total_all ? static_cast<double>(covered_all) / total_all : 1.0; }
  double fraction(int s) const { return total[s] ? static_cast<double>(covered[s]) / total[s] : 1.0; }
};

/// (1 - epsilon) minus three binomial standard errors at N samples.
double coverage_threshold(double epsilon, int samples);

/// Share of interior cleared storage-periods covered by the bounds over
/// `samples` hindsight OED solves. Discharge is covered when A[t] <= A_bar[t];
/// charge when the smallest B over the bound's window is <= B_bar[t].
CoverageResult verify_coverage(const ExperimentInputs& inputs, const BidBounds& bounds, int samples, std::uint64_t seed,
                               BoundWindow window = BoundWindow::Remaining, int jobs = 0);
/// Bounds at config.epsilon from the forecast CED: LMP route when the
/// config asks for it, dual route otherwise.
BidBounds coverage_bounds(const ExperimentConfig& config, const ExperimentInputs& inputs);
/// coverage_bounds, then the above.
CoverageResult verify_coverage(const ExperimentConfig& config, const ExperimentInputs& inputs, int samples, int jobs = 0);

enum class SweepAxis { Soc, Sigma, Epsilon };
SweepAxis parse_sweep_axis(const std::string& text);
const char* to_string(SweepAxis axis);

struct SweepRow {
  double value = 0.0;
  int storage = 0;
  int t = 0;  // 0-based
  double discharge_cap = 0.0;
  double charge_cap = 0.0;
};

struct SweepResult {
  SweepAxis axis = SweepAxis::Soc;
  std::vector<SweepRow> rows;
  bool holds = true;
  std::string counterexample;  // first violating row, CSV-formatted
};

/// Recomputes CED bounds along the axis with everything else fixed and
/// checks the expected sign with 1e-6 slack. The SoC axis varies one
/// storage's e_initial at a time over [e_min, e_max].
SweepResult verify_monotonicity(const ExperimentConfig& config, const ExperimentInputs& inputs, SweepAxis axis,
                                const std::vector<double>& grid);

void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
void write_coverage_csv(std::ostream& out, const CoverageResult& coverage, const Network& network);
/// Per-sample hindsight costs beside the bounds and, when given, the
/// deterministic default bounds.
void write_hindsight_csv(std::ostream& out, const CoverageResult& coverage, const BidBounds& bounds,
                         const BidBounds* benchmark = nullptr);

}  // namespace gridbound
