#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <string>
#include <utility>

#include "gridbound/dispatch.hpp"
#include "gridbound/grid.hpp"

namespace gridbound {

enum class BoundProvenance { CedDual, LmpAnticipated, Deterministic };
const char* to_string(BoundProvenance provenance);

/// Which periods the extremum in the bound ranges over.
enum class BoundWindow { Remaining, Full };
BoundWindow parse_window(const std::string& text);

struct BoundRow {
  double discharge_cap = 0.0;  // A_bar
  double charge_cap = 0.0;     // B_bar
};

/// Caps per storage and period, [s][t].
struct BidBounds {
  Eigen::MatrixXd discharge_cap;
  Eigen::MatrixXd charge_cap;
  double epsilon = 0.0;
  BoundProvenance provenance = BoundProvenance::CedDual;

  int storage_count() const { return static_cast<int>(discharge_cap.rows()); }
  int horizon() const { return static_cast<int>(discharge_cap.cols()); }
  BoundRow at(int s, int t) const { return {discharge_cap(s, t), charge_cap(s, t)}; }
};

/// Periods [first, last] (0-based, inclusive) covered by the window at t.
std::pair<int, int> window_range(BoundWindow window, int t, int horizon);

/// A_bar = M + max theta / eta, B_bar = min theta * eta - M over periods
/// [first, last] of the CED solution. Throws RangeError on an empty window.
BoundRow bounds_from_ced(const DispatchSolution& ced, const Storage& storage, int s, int first, int last);

/// Same caps from the storage bus's risk-aware LMP alone: the opportunity
/// value extremes follow from the charge and discharge stationarity
/// conditions, so A_bar = max LMP and B_bar = min LMP.
BoundRow bounds_from_lmp(const Eigen::VectorXd& lmp_at_bus, const Storage& storage, int first, int last);

/// Full [s][t] tables from one CED solve.
BidBounds bounds_from_ced(const DispatchSolution& ced, const Network& network, double epsilon, BoundWindow window);
BidBounds bounds_from_lmp(const DispatchSolution& ced, const Network& network, double epsilon, BoundWindow window);

/// Time-invariant benchmark: 4th highest DA LMP + M and 4th lowest - M.
BoundRow deterministic_default_bound(const Eigen::VectorXd& da_lmp, const Storage& storage);
BidBounds deterministic_bounds(const Eigen::MatrixXd& da_lmp, const Network& network, int horizon);

/// Clips every discharge price to A_bar and every charge price to B_bar.
StorageOffer cap_bids(const StorageOffer& offer, const BoundRow& bounds);
BoundRow cap_bids(const BoundRow& bids, const BoundRow& bounds);

/// CSV with columns storage,t,A_bar,B_bar,epsilon,provenance (t is 1-based).
void write_bounds_csv(std::ostream& out, const BidBounds& bounds, const Network& network);

}  // namespace gridbound
