#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "fixtures.hpp"
#include "gridbound/agent.hpp"
#include "gridbound/error.hpp"

using namespace gridbound;

namespace {

Eigen::VectorXd prices(std::initializer_list<double> values) {
  Eigen::VectorXd v(values.size());
  int k = 0;
  for (double x : values) v[k++] = x;
  return v;
}

// Best profit over every SoC path on the grid; needs eta = 1 and a power
// limit that is a whole number of grid steps so every move lands on a node.
double exhaustive_profit(const Storage& st, const Eigen::VectorXd& price, int K, int start_index) {
  const double step = (st.e_max - st.e_min) / (K - 1);
  const int reach = static_cast<int>(std::lround(st.power / step));
  const int T = static_cast<int>(price.size());
  std::function<double(int, int)> best = [&](int t, int k) -> double {
    if (t == T) return 0.0;
    double out = -1e300;
    for (int j = std::max(0, k - reach); j <= std::min(K - 1, k + reach); ++j) {
      const double moved = (j - k) * step;
      const double cash = moved < 0 ? (price[t] - st.marginal_cost) * -moved : -(price[t] + st.marginal_cost) * moved;
      out = std::max(out, cash + best(t + 1, j));
    }
    return out;
  };
  return best(0, start_index);
}

}  // namespace

TEST_CASE("withholding scale maps linearly to price sigma") {
  CHECK(withholding_sigma(0.0) == 0.0);
  CHECK(withholding_sigma(5.0) == 50.0);
  CHECK(withholding_sigma(3.0) == 30.0);
  CHECK_THROWS_AS(withholding_sigma(-0.1), RangeError);
  CHECK_THROWS_AS(withholding_sigma(5.5), RangeError);
}

TEST_CASE("Gauss-Hermite rule matches normal moments") {
  for (int q : {3, 5, 7, 9}) {
    const Quadrature rule = gauss_hermite(q);
    double m0 = 0, m1 = 0, m2 = 0, m4 = 0;
    for (int k = 0; k < q; ++k) {
      const double x = rule.nodes[k], w = rule.weights[k];
      m0 += w;
      m1 += w * x;
      m2 += w * x * x;
      m4 += w * x * x * x * x;
    }
    CHECK(m0 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(m1) < 1e-12);
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m4 == doctest::Approx(3.0).epsilon(1e-11));
  }
  // Three nodes are +-sqrt(3) and 0.
  const Quadrature three = gauss_hermite(3);
  CHECK(three.nodes[0] == doctest::Approx(-std::sqrt(3.0)));
  CHECK(three.weights[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("two-period ideal storage earns the spread") {
  const Storage st = fixture::storage(0, 1.0, 1.0, 1.0, 0.0, 0.0);
  const ValueFunction vf = solve_value_function(st, prices({10.0, 30.0}), 0.0, {11, 3});
  CHECK(vf.horizon() == 2);
  CHECK(vf.value(0, 0.0) == 20.0);
  CHECK(exhaustive_profit(st, prices({10.0, 30.0}), 11, 0) == 20.0);
  CHECK((vf.values.row(2).array() == 0.0).all());
}

TEST_CASE("deterministic DP matches exhaustive enumeration") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 15; ++trial) {
    const int K = 11;
    Storage st = fixture::storage(0, 0.1 * (1 + static_cast<int>(3 * U(rng))), 1.0, 1.0, 5.0 * U(rng), 0.0);
    Eigen::VectorXd p(4);
    for (int t = 0; t < 4; ++t) p[t] = 10.0 + 40.0 * U(rng);
    const ValueFunction vf = solve_value_function(st, p, 0.0, {K, 3});
    for (int k = 0; k < K; ++k) {
      CHECK(vf.values(0, k) == doctest::Approx(exhaustive_profit(st, p, K, k)).epsilon(1e-12));
    }
  }
}

TEST_CASE("no profitable cycle under flat prices") {
  const Storage st = fixture::storage(0, 2.0, 8.0, 0.9, 3.0, 4.0);
  const ValueFunction vf = solve_value_function(st, Eigen::VectorXd::Constant(6, 25.0), 0.0, {21, 3});
  // With no salvage value the only gain is selling stored energy, so the
  // flat-price value is the discharge revenue (p - M) * energy delivered.
  // An empty storage therefore has zero value.
  CHECK(std::abs(vf.value(0, 0.0)) < 1e-12);
  const StorageOffer offer = bids_from_value(vf, st, 0.0, 0);
  for (const auto& seg : offer.charge) CHECK(seg.price < 25.0);
}

TEST_CASE("value functions are concave and non-decreasing in SoC") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double e_max = 5.0 + 20.0 * U(rng);
    const Storage st =
        fixture::storage(0, e_max * (0.1 + 0.4 * U(rng)), e_max, 0.8 + 0.2 * U(rng), 10.0 * U(rng), e_max * U(rng));
    Eigen::VectorXd p(8);
    for (int t = 0; t < 8; ++t) p[t] = 60.0 + 60.0 * U(rng);  // far from zero even at 3 sigma
    const ValueFunction vf = solve_value_function(st, p, 15.0 * U(rng), {21 + 10 * (trial % 3), 5});
    for (int t = 0; t <= vf.horizon(); ++t) {
      for (int k = 1; k + 1 < vf.grid_size(); ++k) {
        const double second = vf.values(t, k + 1) - 2 * vf.values(t, k) + vf.values(t, k - 1);
        CHECK(second <= 1e-6);
      }
      for (int k = 0; k + 1 < vf.grid_size(); ++k) {
        CHECK(vf.values(t, k + 1) >= vf.values(t, k) - 1e-9);
        CHECK(vf.slopes(t, k + 1) <= vf.slopes(t, k) + 1e-9);
      }
    }
  }
}

TEST_CASE("value function preconditions") {
  const Storage st = fixture::storage(0, 1.0, 1.0, 1.0, 0.0, 0.0);
  CHECK_THROWS_AS(solve_value_function(st, prices({1.0}), 0.0, {10, 3}), RangeError);
  CHECK_THROWS_AS(solve_value_function(st, prices({1.0}), 0.0, {11, 2}), RangeError);
  CHECK_THROWS_AS(solve_value_function(st, prices({1.0}), -1.0, {11, 3}), RangeError);
}

TEST_CASE("bid curves from a constant subgradient") {
  ValueFunction vf;
  vf.soc_grid = Eigen::VectorXd::LinSpaced(11, 0.0, 1.0);
  vf.values = Eigen::MatrixXd::Zero(3, 11);
  vf.slopes = Eigen::MatrixXd::Constant(3, 11, 30.0);
  const Storage ideal = fixture::storage(0, 0.5, 1.0, 1.0, 0.0, 0.5);
  const StorageOffer flat = bids_from_value(vf, ideal, 0.5, 0);
  REQUIRE(flat.discharge.size() == static_cast<std::size_t>(kDefaultBidSteps));
  for (const auto& seg : flat.discharge) CHECK(seg.price == doctest::Approx(30.0));
  for (const auto& seg : flat.charge) CHECK(seg.price == doctest::Approx(30.0));

  vf.slopes.setConstant(20.0);
  const Storage lossy = fixture::storage(0, 0.5, 1.0, 0.95, 10.0, 0.5);
  const StorageOffer offer = bids_from_value(vf, lossy, 0.5, 1);
  CHECK(offer.discharge.front().price == doctest::Approx(31.0526315789).epsilon(1e-9));
  CHECK(offer.charge.front().price == doctest::Approx(0.95 * 20.0 - 10.0));

  // Quantities add up to the physical caps at this SoC.
  double dq = 0, cq = 0;
  for (const auto& seg : offer.discharge) dq += seg.quantity;
  for (const auto& seg : offer.charge) cq += seg.quantity;
  CHECK(dq == doctest::Approx(std::min(0.5, 0.5 * 0.95)));
  CHECK(cq == doctest::Approx(std::min(0.5, 0.5 / 0.95)));

  CHECK(bids_from_value(vf, lossy, 0.0, 0).discharge.empty());
  CHECK(bids_from_value(vf, lossy, 1.0, 0).charge.empty());
  CHECK_THROWS_AS(bids_from_value(vf, lossy, 1.5, 0), RangeError);
  CHECK_THROWS_AS(bids_from_value(vf, lossy, 0.5, 2), RangeError);
}

TEST_CASE("bid curves are monotone and rise with assumed price volatility") {
  const Storage st = fixture::storage(0, 25.0, 100.0, 0.95, 10.0, 50.0);
  Eigen::VectorXd p(24);
  for (int t = 0; t < 24; ++t) p[t] = 30.0 + 15.0 * std::sin(2 * M_PI * (t - 6) / 24.0);
  // Single hours can move either way; the day-average discharge offer rises.
  double previous_mean = -1e300;
  for (double scale : {0.0, 1.0, 3.0, 5.0}) {
    const ValueFunction vf = solve_value_function(st, p, withholding_sigma(scale));
    double mean = 0.0;
    for (int t = 0; t < 24; ++t) {
      const StorageOffer offer = bids_from_value(vf, st, 50.0, t);
      for (std::size_t k = 1; k < offer.discharge.size(); ++k) {
        CHECK(offer.discharge[k].price >= offer.discharge[k - 1].price - 1e-9);
        CHECK(offer.charge[k].price <= offer.charge[k - 1].price + 1e-9);
      }
      mean += offer.discharge.front().price / 24.0;
    }
    CHECK(mean > previous_mean);
    previous_mean = mean;
  }
}

TEST_CASE("realized SoC follows the storage recursion") {
  const Storage st = fixture::storage(0, 1.0, 1.0, 0.95, 0.0, 0.5);
  CHECK(realize_dispatch(st, 0.5, 0.0, 0.0) == 0.5);
  CHECK(realize_dispatch(st, 1.0, 0.475, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  const Storage ideal = fixture::storage(0, 0.4, 1.0, 1.0, 0.0, 0.0);
  CHECK(realize_dispatch(ideal, 0.0, 0.0, 0.4) == doctest::Approx(0.4));
  CHECK(realize_dispatch(ideal, 0.0, 1e-10, 0.0) == 0.0);  // clamped
  CHECK_THROWS_AS(realize_dispatch(ideal, 0.0, 0.1, 0.0), SolveError);
  CHECK_THROWS_AS(realize_dispatch(ideal, 0.9, 0.0, 0.2), SolveError);
}
