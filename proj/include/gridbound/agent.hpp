#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gridbound/dispatch.hpp"
#include "gridbound/grid.hpp"

namespace gridbound {

/// Assumed price standard deviation for a withholding scale in [0, 5].
double withholding_sigma(double scale);

/// Nodes and weights for E[f(Z)], Z ~ N(0, 1); weights sum to one.
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature gauss_hermite(int count);

/// Opportunity value of stored energy on an equally spaced SoC grid.
/// Row t of `values` is the value to go after period t (row 0 is the start
/// of the day, row T is the terminal value).
struct ValueFunction {
  Eigen::VectorXd soc_grid;
  Eigen::MatrixXd values;  // (T + 1) x K
  Eigen::MatrixXd slopes;  // (T + 1) x K, right differences

  int horizon() const { return static_cast<int>(values.rows()) - 1; }
  int grid_size() const { return static_cast<int>(soc_grid.size()); }

  /// Linear interpolation of V[t] at soc.
  double value(int t, double soc) const;
  /// Linear interpolation of the right-difference slope of V[t] at soc.
  double slope(int t, double soc) const;
};

struct ValueFunctionOptions {
  int grid_points = 101;
  int quadrature_nodes = 7;
};

/// Backward recursion over the day with the period price drawn from
/// N(da_price[t], price_sigma). The within-period action is chosen after
/// the price is seen.
ValueFunction solve_value_function(const Storage& storage, const Eigen::VectorXd& da_price, double price_sigma,
                                   const ValueFunctionOptions& options = {});

inline constexpr int kDefaultBidSteps = 10;

/// SoC-dependent offer for period t (0-based): equal quantity steps up to
/// the physical caps at `soc`, priced from the value function slopes.
StorageOffer bids_from_value(const ValueFunction& value, const Storage& storage, double soc, int t,
                             int steps = kDefaultBidSteps);

/// SoC after clearing (p, b). Throws SolveError if the result leaves
/// [e_min, e_max] by more than 1e-9.
double realize_dispatch(const Storage& storage, double soc, double discharge, double charge);

/// Experiment-side agent: one per strategic storage.
struct StorageAgent {
  int storage = 0;
  double withholding_scale = 0.0;
  ValueFunctionOptions options;
  ValueFunction value;
  double soc = 0.0;
};

}  // namespace gridbound
