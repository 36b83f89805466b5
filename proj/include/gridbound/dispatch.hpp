#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

#include "gridbound/grid.hpp"
#include "gridbound/qp.hpp"
#include "gridbound/uncertainty.hpp"

namespace gridbound {

enum class DispatchKind { OED, SED, CED };
enum class ComplementarityMode { Relaxed, Exact };

const char* to_string(DispatchKind kind);
const char* to_string(ComplementarityMode mode);

/// One price-quantity step of a storage offer.
struct BidSegment {
  double quantity = 0.0;  // MWh
  double price = 0.0;     // $/MWh
};

/// Storage offer for a single SED period. Discharge prices are
/// non-decreasing, charge prices non-increasing along the segments.
struct StorageOffer {
  std::vector<BidSegment> discharge;
  std::vector<BidSegment> charge;

  /// Single-price offer covering the full physical cap on each side.
  static StorageOffer scalar(double discharge_price, double charge_price);
};

/// Multipliers of the dispatch constraints, all "cost per unit of
/// right-hand side" with inequality duals >= 0. Matrices are indexed
/// [entity][t].
struct DualBundle {
  Eigen::VectorXd lambda;     // energy balance
  Eigen::VectorXd reserve;    // system reserve requirement
  Eigen::MatrixXd omega_lo, omega_hi;  // line flow lower/upper limit
  Eigen::MatrixXd theta;      // SoC recursion (OED/CED only)
  Eigen::MatrixXd alpha_lo, alpha_hi;  // charge bounds
  Eigen::MatrixXd beta_lo, beta_hi;    // discharge bounds
  Eigen::MatrixXd iota_lo, iota_hi;    // SoC bounds
  Eigen::MatrixXd nu_lo, nu_hi;        // generator output limits
  Eigen::MatrixXd kappa_lo, kappa_hi;  // ramp limits
};

struct DispatchProblem {
  DispatchKind kind = DispatchKind::OED;
  std::shared_ptr<const Network> network;
  int horizon = 0;
  ComplementarityMode mode = ComplementarityMode::Relaxed;

  /// Netload used in the constraints: realized d (OED, SED) or the mean
  /// (CED). SED holds a single column.
  Eigen::MatrixXd netload;
  Eigen::MatrixXd sigma;  // CED only, else empty
  double epsilon = 0.0;
  double quantile = 0.0;  // F^-1(1 - epsilon) for CED

  /// SED: state at the start of the period.
  Eigen::VectorXd prior_soc;
  std::vector<StorageOffer> offers;

  qp::Problem lp;

  // Column indices, [entity][t]. `cost` holds the epigraph variable of a
  // piecewise-linear generator (-1 for quadratic costs).
  std::vector<std::vector<int>> g, r, p, b, e, cost;
  std::vector<std::vector<int>> injection;  // [bus][t], only with lines
  // SED offer segments, [storage][k].
  std::vector<std::vector<int>> p_seg, b_seg;

  // Row indices (-1 where the row is absent).
  std::vector<int> balance_row, reserve_row;
  std::vector<std::vector<int>> flow_row, capacity_row, ramp_row, soc_row;
};

struct DispatchSolution {
  qp::Status status = qp::Status::IterationLimit;
  DispatchKind kind = DispatchKind::OED;
  Eigen::MatrixXd g, r, p, b, e;
  double objective = 0.0;
  DualBundle duals;
  Eigen::MatrixXd lmp;  // [bus][t]
  /// Ties in the primal that make the reported duals one of several.
  bool degenerate = false;
  int iterations = 0;
  /// Raw solver output, kept for audits.
  qp::Solution raw;

  bool optimal() const { return status == qp::Status::Optimal; }
};

DispatchProblem build_oed(std::shared_ptr<const Network> network, const Eigen::MatrixXd& netload, int horizon);

/// Single-period dispatch at period `t` (1-based, used for names only).
/// `previous_output` enables ramp limits against the prior dispatch.
DispatchProblem build_sed(std::shared_ptr<const Network> network, int t, const Eigen::VectorXd& prior_soc,
                          const std::vector<StorageOffer>& offers, const Eigen::VectorXd& netload,
                          const std::optional<Eigen::VectorXd>& previous_output = std::nullopt);

DispatchProblem build_ced(std::shared_ptr<const Network> network, const NetloadForecast& forecast, double epsilon,
                          const UncertaintyModel& model, int horizon);

/// Solves the convex program and maps the multipliers. Infeasible and
/// unbounded instances come back as a status, not an exception.
DispatchSolution solve(const DispatchProblem& problem, const qp::Options& options = {});

/// Enforces p * b = 0 per `problem.mode`; see the README for the two modes.
/// Throws RangeError when Exact mode exceeds the enumeration budget.
DispatchSolution resolve_complementarity(const DispatchProblem& problem, const DispatchSolution& raw,
                                         const qp::Options& options = {});

/// solve() followed by resolve_complementarity().
DispatchSolution solve_dispatch(const DispatchProblem& problem, const qp::Options& options = {});

inline constexpr int kExactEnumerationLimit = 12;

/// LMP[n][t] = lambda[t] - sum_l ptdf(l, n) * (omega_hi - omega_lo).
Eigen::MatrixXd compute_lmp(const DualBundle& duals, const Network& network);

struct HindsightCosts {
  Eigen::VectorXd discharge;  // A[t]
  Eigen::VectorXd charge;     // B[t]
};

/// A = M + theta / eta, B = theta * eta - M from an OED or CED solution.
HindsightCosts hindsight_marginal_cost(const DispatchSolution& solution, const Storage& storage, int storage_index);

/// Worst violation of the storage KKT conditions that tie theta to the
/// LMP; used by tests and the acceptance harness.
struct KktReport {
  double soc_stationarity = 0.0;  // theta_t - theta_{t+1} - iota_lo + iota_hi
  double discharge_stationarity = 0.0;
  double charge_stationarity = 0.0;
};
KktReport storage_kkt_residuals(const DispatchProblem& problem, const DispatchSolution& solution);

/// Writes the LP/QP in CPLEX-LP format.
void write_problem(std::ostream& out, const DispatchProblem& problem);

}  // namespace gridbound
