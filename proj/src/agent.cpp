#include "gridbound/agent.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "gridbound/error.hpp"

namespace gridbound {

double withholding_sigma(double scale) {
  if (!(scale >= 0.0 && scale <= 5.0)) throw RangeError("withholding scale must lie in [0, 5]");
  return 10.0 * scale;
}

// Golub-Welsch on the probabilists' Hermite recurrence.
Quadrature gauss_hermite(int count) {
  if (count < 1) throw RangeError("quadrature needs at least one node");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(count, count);
  for (int k = 1; k < count; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  Quadrature q;
  for (int k = 0; k < count; ++k) {
    q.nodes.push_back(eig.eigenvalues()[k]);
    const double v = eig.eigenvectors()(0, k);
    q.weights.push_back(v * v);
  }
  return q;
}

namespace {

// Fractional grid position of soc, clamped to the grid.
std::pair<int, double> locate(const Eigen::VectorXd& grid, double soc) {
  const int K = static_cast<int>(grid.size());
  const double step = (grid[K - 1] - grid[0]) / (K - 1);
  if (!(step > 0.0)) return {0, 0.0};
  const double pos = std::clamp((soc - grid[0]) / step, 0.0, static_cast<double>(K - 1));
  const int k = std::min(static_cast<int>(pos), K - 2);
  return {k, pos - k};
}

double interpolate(const Eigen::VectorXd& grid, const Eigen::Ref<const Eigen::RowVectorXd>& row, double soc) {
  if (grid.size() == 1) return row[0];
  const auto [k, w] = locate(grid, soc);
  return (1.0 - w) * row[k] + w * row[k + 1];
}

}  // namespace

double ValueFunction::value(int t, double soc) const { return interpolate(soc_grid, values.row(t), soc); }

double ValueFunction::slope(int t, double soc) const { return interpolate(soc_grid, slopes.row(t), soc); }

ValueFunction solve_value_function(const Storage& st, const Eigen::VectorXd& da_price, double price_sigma,
                                   const ValueFunctionOptions& options) {
  if (options.grid_points < 11) throw RangeError("value function grid needs at least 11 points");
  if (options.quadrature_nodes < 3) throw RangeError("value function needs at least 3 quadrature nodes");
  if (!(price_sigma >= 0.0)) throw RangeError("price sigma must be >= 0");
  const int K = options.grid_points;
  const int T = static_cast<int>(da_price.size());
  const double eta = st.efficiency;
  const double m = st.marginal_cost;

  ValueFunction vf;
  vf.soc_grid = Eigen::VectorXd::LinSpaced(K, st.e_min, st.e_max);
  vf.values = Eigen::MatrixXd::Zero(T + 1, K);
  vf.slopes = Eigen::MatrixXd::Zero(T + 1, K);
  const double step = K > 1 ? (st.e_max - st.e_min) / (K - 1) : 0.0;

  // A certain price needs one node; the rule's weights only sum to one up to rounding.
  const Quadrature quad = price_sigma > 0.0 ? gauss_hermite(options.quadrature_nodes) : Quadrature{{0.0}, {1.0}};

  for (int t = T; t >= 1; --t) {
    const Eigen::RowVectorXd next = vf.values.row(t);
    for (int k = 0; k < K; ++k) {
      const double e = vf.soc_grid[k];
      const double lo = std::max(st.e_min, e - st.power / eta);
      const double hi = std::min(st.e_max, e + st.power * eta);
      // The reward is concave and piecewise linear in the next SoC with
      // kinks at e and at grid points, so those plus the ends suffice.
      std::vector<double> candidates{lo, hi, e};
      for (int j = 0; j < K; ++j) {
        if (vf.soc_grid[j] > lo && vf.soc_grid[j] < hi) candidates.push_back(vf.soc_grid[j]);
      }
      double expected = 0.0;
      for (std::size_t q = 0; q < quad.nodes.size(); ++q) {
        const double price = da_price[t - 1] + price_sigma * quad.nodes[q];
        double best = -std::numeric_limits<double>::infinity();
        for (double e_next : candidates) {
          double reward;
          if (e_next <= e) {
            const double p = (e - e_next) * eta;
            reward = (price - m) * p;
          } else {
            const double b = (e_next - e) / eta;
            reward = -(price + m) * b;
          }
          best = std::max(best, reward + interpolate(vf.soc_grid, next, e_next));
        }
        expected += quad.weights[q] * best;
      }
      vf.values(t - 1, k) = expected;
    }
  }

  for (int t = 0; t <= T; ++t) {
    for (int k = 0; k + 1 < K; ++k) vf.slopes(t, k) = (vf.values(t, k + 1) - vf.values(t, k)) / step;
    if (K > 1) vf.slopes(t, K - 1) = vf.slopes(t, K - 2);
  }
  return vf;
}

StorageOffer bids_from_value(const ValueFunction& value, const Storage& st, double soc, int t, int steps) {
  if (soc < st.e_min - 1e-9 || soc > st.e_max + 1e-9) throw RangeError("agent SoC outside [e_min, e_max]");
  if (t < 0 || t >= value.horizon()) throw RangeError("bid period outside the value function horizon");
  const double eta = st.efficiency;
  const double m = st.marginal_cost;
  const double discharge_cap = std::max(0.0, std::min(st.power, (soc - st.e_min) * eta));
  const double charge_cap = std::max(0.0, std::min(st.power, (st.e_max - soc) / eta));

  // Bids in period t are valued against the value to go after period t.
  StorageOffer offer;
  if (discharge_cap > 0.0) {
    const double dq = discharge_cap / steps;
    for (int k = 1; k <= steps; ++k) {
      const double v = value.slope(t + 1, soc - k * dq / eta);
      offer.discharge.push_back({dq, m + v / eta});
    }
  }
  if (charge_cap > 0.0) {
    const double dq = charge_cap / steps;
    for (int k = 1; k <= steps; ++k) {
      const double v = value.slope(t + 1, soc + k * dq * eta);
      offer.charge.push_back({dq, eta * v - m});
    }
  }
  return offer;
}

double realize_dispatch(const Storage& st, double soc, double discharge, double charge) {
  const double next = soc - discharge / st.efficiency + charge * st.efficiency;
  if (next < st.e_min - 1e-9 || next > st.e_max + 1e-9) {
    throw SolveError("cleared storage schedule leaves the SoC range (" + std::to_string(next) + ")");
  }
  return std::clamp(next, st.e_min, st.e_max);
}

}  // namespace gridbound
