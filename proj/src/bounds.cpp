#include "gridbound/bounds.hpp"

#include <algorithm>
#include <vector>

#include "gridbound/csv.hpp"
#include "gridbound/error.hpp"

namespace gridbound {

const char* to_string(BoundProvenance provenance) {
  switch (provenance) {
    case BoundProvenance::CedDual: return "CED-dual";
    case BoundProvenance::LmpAnticipated: return "LMP-anticipated";
    case BoundProvenance::Deterministic: return "Deterministic-benchmark";
  }
  return "unknown";
}

BoundWindow parse_window(const std::string& text) {
  if (text == "remaining") return BoundWindow::Remaining;
  if (text == "full") return BoundWindow::Full;
  throw InputError("unknown bound window '" + text + "' (expected remaining or full)");
}

std::pair<int, int> window_range(BoundWindow window, int t, int horizon) {
  return {window == BoundWindow::Full ? 0 : t, horizon - 1};
}

namespace {

void check_window(int first, int last, Eigen::Index size) {
  if (first < 0 || last >= size || first > last) {
    throw RangeError("bound window [" + std::to_string(first) + ", " + std::to_string(last) + "] is empty or out of range");
  }
}

}  // namespace

BoundRow bounds_from_ced(const DispatchSolution& ced, const Storage& storage, int s, int first, int last) {
  if (ced.duals.theta.rows() <= s) throw InputError("CED solution has no opportunity values for this storage");
  const auto theta = ced.duals.theta.row(s);
  check_window(first, last, theta.size());
  const auto span = theta.segment(first, last - first + 1);
  return {storage.marginal_cost + span.maxCoeff() / storage.efficiency,
          span.minCoeff() * storage.efficiency - storage.marginal_cost};
}

BoundRow bounds_from_lmp(const Eigen::VectorXd& lmp_at_bus, const Storage& storage, int first, int last) {
  check_window(first, last, lmp_at_bus.size());
  const auto span = lmp_at_bus.segment(first, last - first + 1);
  const double eta = storage.efficiency;
  const double m = storage.marginal_cost;
  const double theta_min = (span.minCoeff() + m) / eta;
  const double theta_max = (span.maxCoeff() - m) * eta;
  return {m + theta_max / eta, theta_min * eta - m};
}

BidBounds bounds_from_ced(const DispatchSolution& ced, const Network& network, double epsilon, BoundWindow window) {
  if (!ced.optimal()) throw SolveError("bounds need an optimal CED solution");
  const int S = network.storage_count();
  const int T = static_cast<int>(ced.duals.theta.cols());
  BidBounds out{Eigen::MatrixXd(S, T), Eigen::MatrixXd(S, T), epsilon, BoundProvenance::CedDual};
  for (int s = 0; s < S; ++s) {
    for (int t = 0; t < T; ++t) {
      const auto [first, last] = window_range(window, t, T);
      const BoundRow row = bounds_from_ced(ced, network.storages[s], s, first, last);
      out.discharge_cap(s, t) = row.discharge_cap;
      out.charge_cap(s, t) = row.charge_cap;
    }
  }
  return out;
}

BidBounds bounds_from_lmp(const DispatchSolution& ced, const Network& network, double epsilon, BoundWindow window) {
  if (!ced.optimal()) throw SolveError("bounds need an optimal CED solution");
  const int S = network.storage_count();
  const int T = static_cast<int>(ced.lmp.cols());
  BidBounds out{Eigen::MatrixXd(S, T), Eigen::MatrixXd(S, T), epsilon, BoundProvenance::LmpAnticipated};
  for (int s = 0; s < S; ++s) {
    const Eigen::VectorXd lmp = ced.lmp.row(network.storages[s].bus).transpose();
    for (int t = 0; t < T; ++t) {
      const auto [first, last] = window_range(window, t, T);
      const BoundRow row = bounds_from_lmp(lmp, network.storages[s], first, last);
      out.discharge_cap(s, t) = row.discharge_cap;
      out.charge_cap(s, t) = row.charge_cap;
    }
  }
  return out;
}

BoundRow deterministic_default_bound(const Eigen::VectorXd& da_lmp, const Storage& storage) {
  if (da_lmp.size() < 4) throw RangeError("deterministic bound needs at least 4 day-ahead prices");
  std::vector<double> sorted(da_lmp.data(), da_lmp.data() + da_lmp.size());
  std::sort(sorted.begin(), sorted.end());
  const double fourth_highest = sorted[sorted.size() - 4];
  const double fourth_lowest = sorted[3];
  return {fourth_highest + storage.marginal_cost, fourth_lowest - storage.marginal_cost};
}

BidBounds deterministic_bounds(const Eigen::MatrixXd& da_lmp, const Network& network, int horizon) {
  const int S = network.storage_count();
  BidBounds out{Eigen::MatrixXd(S, horizon), Eigen::MatrixXd(S, horizon), 0.0, BoundProvenance::Deterministic};
  for (int s = 0; s < S; ++s) {
    const BoundRow row = deterministic_default_bound(da_lmp.row(network.storages[s].bus).transpose(), network.storages[s]);
    out.discharge_cap.row(s).setConstant(row.discharge_cap);
    out.charge_cap.row(s).setConstant(row.charge_cap);
  }
  return out;
}

StorageOffer cap_bids(const StorageOffer& offer, const BoundRow& bounds) {
  StorageOffer out = offer;
  for (auto& seg : out.discharge) seg.price = std::min(seg.price, bounds.discharge_cap);
  for (auto& seg : out.charge) seg.price = std::min(seg.price, bounds.charge_cap);
  return out;
}

BoundRow cap_bids(const BoundRow& bids, const BoundRow& bounds) {
  return {std::min(bids.discharge_cap, bounds.discharge_cap), std::min(bids.charge_cap, bounds.charge_cap)};
}

void write_bounds_csv(std::ostream& out, const BidBounds& bounds, const Network& network) {
  csv::write_row(out, {"storage", "t", "A_bar", "B_bar", "epsilon", "provenance"});
  for (int s = 0; s < bounds.storage_count(); ++s) {
    const std::string& name = network.storages[s].name;
    const std::string id = name.empty() ? std::to_string(s) : name;
    for (int t = 0; t < bounds.horizon(); ++t) {
      csv::write_row(out, {id, std::to_string(t + 1), csv::format(bounds.discharge_cap(s, t)),
                           csv::format(bounds.charge_cap(s, t)), csv::format(bounds.epsilon),
                           to_string(bounds.provenance)});
    }
  }
}

}  // namespace gridbound
