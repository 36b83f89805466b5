#pragma once

// Independent reference computations used only by the tests.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "gridbound/grid.hpp"

namespace oracle {

struct LpResult {
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd x;
};

// min c^T x s.t. A x <= b by enumerating every vertex. Only for tiny,
// bounded problems.
inline LpResult vertex_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(A.rows());
  LpResult best;
  if (m < n) return best;
  std::vector<int> pick(n);
  for (int k = 0; k < n; ++k) pick[k] = k;
  while (true) {
    Eigen::MatrixXd M(n, n);
    Eigen::VectorXd r(n);
    for (int k = 0; k < n; ++k) {
      M.row(k) = A.row(pick[k]);
      r[k] = b[pick[k]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.rank() == n) {
      const Eigen::VectorXd x = lu.solve(r);
      if (((A * x - b).array() <= 1e-9 * (1.0 + b.cwiseAbs().array())).all()) {
        const double v = c.dot(x);
        if (v < best.value) {
          best.value = v;
          best.x = x;
        }
      }
    }
    int k = n - 1;
    while (k >= 0 && pick[k] == m - n + k) --k;
    if (k < 0) break;
    ++pick[k];
    for (int j = k + 1; j < n; ++j) pick[j] = pick[j - 1] + 1;
  }
  return best;
}

// Line flows for a balanced injection vector from the full nodal
// susceptance matrix via its pseudoinverse.
inline Eigen::VectorXd dc_power_flow(const std::vector<gridbound::Line>& lines, int bus_count,
                                     const Eigen::VectorXd& injection) {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(bus_count, bus_count);
  for (const auto& l : lines) {
    B(l.from_bus, l.from_bus) += l.susceptance;
    B(l.to_bus, l.to_bus) += l.susceptance;
    B(l.from_bus, l.to_bus) -= l.susceptance;
    B(l.to_bus, l.from_bus) -= l.susceptance;
  }
  const Eigen::VectorXd angle = B.completeOrthogonalDecomposition().solve(injection);
  Eigen::VectorXd flow(lines.size());
  for (std::size_t k = 0; k < lines.size(); ++k) {
    flow[k] = lines[k].susceptance * (angle[lines[k].from_bus] - angle[lines[k].to_bus]);
  }
  return flow;
}

// Standard-normal quantile by bisection on erfc.
inline double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oracle
