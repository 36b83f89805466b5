#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "gridbound/dispatch.hpp"
#include "oracles.hpp"

using namespace gridbound;

namespace {

Eigen::MatrixXd row(std::initializer_list<double> values) {
  Eigen::MatrixXd m(1, values.size());
  int k = 0;
  for (double v : values) m(0, k++) = v;
  return m;
}

NetloadForecast forecast(const Eigen::MatrixXd& mean, double sigma) {
  return {mean, Eigen::MatrixXd::Constant(mean.rows(), mean.cols(), sigma)};
}

// Optimal cost of the ramp counterexample by vertex enumeration, one LP
// per charge/discharge pattern. Variables: gen A output a_t and storage
// magnitude s_t; gen B covers the rest of the netload.
double counterexample_oracle() {
  const double d[2] = {100.0, 60.0};
  const double eta = 0.9;
  double best = qp::kInf;
  for (int pattern = 0; pattern < 4; ++pattern) {
    double sign[2], soc[2];
    for (int t = 0; t < 2; ++t) {
      const bool discharge = (pattern >> t) & 1;
      sign[t] = discharge ? 1.0 : -1.0;
      soc[t] = discharge ? -1.0 / eta : eta;
    }
    std::vector<std::pair<Eigen::Vector4d, double>> rows;
    auto add = [&](Eigen::Vector4d a, double b) { rows.push_back({a, b}); };
    for (int t = 0; t < 2; ++t) {
      Eigen::Vector4d ea = Eigen::Vector4d::Zero(), es = Eigen::Vector4d::Zero();
      ea[t] = 1.0;
      es[2 + t] = 1.0;
      add(ea, 100.0);
      add(-ea, 0.0);
      add(es, 200.0);
      add(-es, 0.0);
      add(ea + sign[t] * es, d[t]);             // gen B >= 0
      add(-ea - sign[t] * es, 200.0 - d[t]);   // gen B <= 200
    }
    add(Eigen::Vector4d(1.0, -1.0, 0.0, 0.0), 10.0);  // ramp down
    add(Eigen::Vector4d(0.0, 0.0, soc[0], 0.0), 9.0);
    add(Eigen::Vector4d(0.0, 0.0, -soc[0], 0.0), 0.0);
    add(Eigen::Vector4d(0.0, 0.0, soc[0], soc[1]), 9.0);
    add(Eigen::Vector4d(0.0, 0.0, -soc[0], -soc[1]), 0.0);
    Eigen::MatrixXd A(rows.size(), 4);
    Eigen::VectorXd b(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      A.row(k) = rows[k].first.transpose();
      b[k] = rows[k].second;
    }
    const Eigen::Vector4d c(10.0 - 50.0, 10.0 - 50.0, 1.0 - 50.0 * sign[0], 1.0 - 50.0 * sign[1]);
    const auto r = oracle::vertex_lp(c, A, b);
    best = std::min(best, r.value + 50.0 * (d[0] + d[1]));
  }
  return best;
}

}  // namespace

TEST_CASE("oed: single bus quadratic unit prices at marginal cost") {
  Network n = fixture::buses(1);
  n.generators.push_back(fixture::quadratic_gen(0, 0.01, 20.0, 1000.0));
  const auto net = fixture::share(n);
  const auto sol = solve_dispatch(build_oed(net, row({100.0, 200.0}), 2));
  REQUIRE(sol.optimal());
  CHECK(sol.duals.lambda[0] == doctest::Approx(22.0).epsilon(1e-8));
  CHECK(sol.duals.lambda[1] == doctest::Approx(24.0).epsilon(1e-8));
  CHECK(sol.g(0, 0) == doctest::Approx(100.0).epsilon(1e-8));
  CHECK(sol.g(0, 1) == doctest::Approx(200.0).epsilon(1e-8));
  // 0.01*(100^2 + 200^2) + 20*300
  CHECK(sol.objective == doctest::Approx(6500.0).epsilon(1e-9));
  CHECK(sol.lmp(0, 1) == doctest::Approx(24.0).epsilon(1e-8));
}

TEST_CASE("oed: zero load gives zero dispatch and only fixed costs") {
  Network n = fixture::buses(1);
  n.generators.push_back(fixture::quadratic_gen(0, 0.01, 20.0, 100.0));
  n.generators[0].cost = CostFunction::quadratic(0.01, 20.0, 7.0);
  const auto sol = solve_dispatch(build_oed(fixture::share(n), row({0.0, 0.0, 0.0}), 3));
  REQUIRE(sol.optimal());
  CHECK(std::abs(sol.g.maxCoeff()) < 1e-7);
  CHECK(sol.objective == doctest::Approx(21.0).epsilon(1e-7));
}

TEST_CASE("oed: ideal storage shifts one unit from the cheap to the dear period") {
  Network n = fixture::buses(1);
  Generator g;
  g.cost = CostFunction::piecewise_linear({{0.0, 0.0}, {100.0, 1000.0}, {300.0, 7000.0}});
  g.g_max = 300.0;
  g.ramp_up = g.ramp_down = 300.0;
  n.generators.push_back(g);
  n.storages.push_back(fixture::storage(0, 1.0, 1.0, 1.0, 0.0, 0.0));
  const auto net = fixture::share(n);
  const auto sol = solve_dispatch(build_oed(net, row({50.0, 150.0}), 2));
  REQUIRE(sol.optimal());
  CHECK(sol.b(0, 0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.p(0, 1) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(sol.duals.lambda[0] == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(sol.duals.lambda[1] == doctest::Approx(30.0).epsilon(1e-6));

  // Exhaustive search over storage schedules on a fine grid.
  double best = qp::kInf;
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      const double u1 = -1.0 + 0.02 * i, u2 = -1.0 + 0.02 * j;  // positive = discharge
      const double e1 = -u1, e2 = e1 - u2;
      if (e1 < -1e-12 || e1 > 1.0 + 1e-12 || e2 < -1e-12 || e2 > 1.0 + 1e-12) continue;
      best = std::min(best, g.cost(50.0 - u1) + g.cost(150.0 - u2));
    }
  }
  CHECK(sol.objective == doctest::Approx(best).epsilon(1e-7));
  // The energy cap binds after period 1, so theta_1 may sit anywhere
  // between the two prices.
  const auto h = hindsight_marginal_cost(sol, net->storages[0], 0);
  CHECK(h.discharge[0] >= 10.0 - 1e-6);
  CHECK(h.discharge[0] <= 30.0 + 1e-6);
}

TEST_CASE("oed: infeasible when capacity cannot meet demand") {
  Network n = fixture::buses(1);
  n.generators.push_back(fixture::linear_gen(0, 20.0, 100.0));
  const auto sol = solve(build_oed(fixture::share(n), row({50.0, 150.0}), 2));
  CHECK(sol.status == qp::Status::Infeasible);
}

TEST_CASE("sed: discharge clears at its cap when the bid is below the price") {
  Network n = fixture::buses(1);
  n.generators.push_back(fixture::quadratic_gen(0, 0.01, 20.0, 1000.0));
  n.storages.push_back(fixture::storage(0, 10.0, 100.0, 1.0, 0.0, 50.0));
  const auto net = fixture::share(n);
  Eigen::VectorXd soc(1);
  soc << 50.0;
  Eigen::VectorXd d(1);
  d << 150.0;
  const auto sol = solve_dispatch(build_sed(net, 1, soc, {StorageOffer::scalar(22.0, 0.0)}, d));
  REQUIRE(sol.optimal());
  CHECK(sol.p(0, 0) == doctest::Approx(10.0).epsilon(1e-7));
  CHECK(sol.g(0, 0) == doctest::Approx(140.0).epsilon(1e-7));
  CHECK(sol.duals.lambda[0] == doctest::Approx(22.8).epsilon(1e-7));
  CHECK(sol.e(0, 0) == doctest::Approx(40.0).epsilon(1e-7));
}

TEST_CASE("sed: out-of-the-money bids leave the storage idle") {
  Network n = fixture::buses(1);
  n.generators.push_back(fixture::quadratic_gen(0, 0.01, 20.0, 1000.0));
  n.storages.push_back(fixture::storage(0, 10.0, 100.0, 0.9, 1.0, 50.0));
  const auto net = fixture::share(n);
  Eigen::VectorXd soc(1), d(1);
  soc << 50.0;
  d << 150.0;
  const auto sol = solve_dispatch(build_sed(net, 1, soc, {StorageOffer::scalar(40.0, 5.0)}, d));
  REQUIRE(sol.optimal());
  CHECK(std::abs(sol.p(0, 0)) < 1e-7);
  CHECK(std::abs(sol.b(0, 0)) < 1e-7);
  CHECK(sol.duals.lambda[0] == doctest::Approx(23.0).epsilon(1e-8));
}

TEST_CASE("sed: storage at its minimum SoC cannot discharge") {
  Network n = fixture::buses(1);
  n.generators.push_back(fixture::quadratic_gen(0, 0.01, 20.0, 1000.0));
  n.storages.push_back(fixture::storage(0, 10.0, 100.0, 1.0, 0.0, 0.0));
  Eigen::VectorXd soc(1), d(1);
  soc << 0.0;
  d << 150.0;
  const auto sol = solve_dispatch(build_sed(fixture::share(n), 1, soc, {StorageOffer::scalar(0.0, -100.0)}, d));
  REQUIRE(sol.optimal());
  CHECK(std::abs(sol.p(0, 0)) < 1e-7);
}

TEST_CASE("sed: non-finite bids are rejected") {
  Network n = fixture::buses(1);
  n.generators.push_back(fixture::quadratic_gen(0, 0.01, 20.0, 1000.0));
  n.storages.push_back(fixture::storage(0, 10.0, 100.0, 1.0, 0.0, 10.0));
  Eigen::VectorXd soc(1), d(1);
  soc << 10.0;
  d << 1.0;
  CHECK_THROWS_AS(build_sed(fixture::share(n), 1, soc, {StorageOffer::scalar(std::nan(""), 0.0)}, d), InputError);
}

TEST_CASE("ced: gaussian quantile raises the effective demand") {
  Network n = fixture::buses(1);
  n.generators.push_back(fixture::quadratic_gen(0, 0.01, 20.0, 1000.0));
  const auto net = fixture::share(n);
  const auto P = build_ced(net, forecast(row({100.0}), 10.0), 0.05, GaussianModel{}, 1);
  const double z = oracle::normal_quantile(0.95);
  CHECK(P.quantile == doctest::Approx(z).epsilon(1e-12));
  const auto sol = solve_dispatch(P);
  REQUIRE(sol.optimal());
  CHECK(sol.g(0, 0) == doctest::Approx(100.0 + 10.0 * z).epsilon(1e-8));
  CHECK(sol.duals.lambda[0] == doctest::Approx(20.0 + 0.02 * (100.0 + 10.0 * z)).epsilon(1e-8));
  CHECK(sol.duals.lambda[0] == doctest::Approx(22.329).epsilon(1e-4));
}

TEST_CASE("ced: symmetric robust shape at epsilon 0.6 equals the mean dispatch") {
  Network n = fixture::buses(1);
  n.generators.push_back(fixture::quadratic_gen(0, 0.01, 20.0, 1000.0));
  n.storages.push_back(fixture::storage(0, 10.0, 40.0, 0.9, 2.0, 20.0));
  const auto net = fixture::share(n);
  const auto mean = row({100.0, 300.0, 150.0});
  const auto ced = solve_dispatch(build_ced(net, forecast(mean, 25.0), 0.6, RobustModel{RobustShape::Symmetric}, 3));
  const auto oed = solve_dispatch(build_oed(net, mean, 3));
  REQUIRE(ced.optimal());
  REQUIRE(oed.optimal());
  CHECK(ced.objective == doctest::Approx(oed.objective).epsilon(1e-9));
}

Eigen::MatrixXd net_storage_by_bus(const Network& net, const DispatchSolution& sol) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(net.bus_count(), sol.p.cols());
  for (std::size_t s = 0; s < net.storages.size(); ++s) {
    out.row(net.storages[s].bus) += sol.p.row(s) - sol.b.row(s);
  }
  return out;
}

TEST_CASE("ced: collapses to oed when sigma is zero") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = fixture::random_instance(rng, trial % 2 ? 3 : 1);
    const auto oed = solve_dispatch(build_oed(inst.network, inst.netload, inst.horizon));
    const auto ced = solve_dispatch(build_ced(inst.network, forecast(inst.netload, 0.0), 0.05, GaussianModel{}, inst.horizon));
    REQUIRE(oed.status == ced.status);
    if (!oed.optimal()) continue;
    CHECK(std::abs(oed.objective - ced.objective) <= 1e-6 * (1.0 + std::abs(oed.objective)));
    CHECK((oed.duals.lambda - ced.duals.lambda).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((oed.g - ced.g).cwiseAbs().maxCoeff() < 1e-6);
    // Two storages on one bus can trade energy at tied prices, so only the
    // per-bus storage total is unique.
    CHECK((net_storage_by_bus(*inst.network, oed) - net_storage_by_bus(*inst.network, ced)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("ced: objective is monotone in sigma and epsilon") {
  std::mt19937_64 rng(5);
  const auto inst = fixture::random_instance(rng, 1);
  double previous = -qp::kInf;
  for (double sigma : {0.0, 2.0, 5.0, 10.0}) {
    const auto sol = solve_dispatch(build_ced(inst.network, forecast(inst.netload, sigma), 0.05, GaussianModel{}, inst.horizon));
    REQUIRE(sol.optimal());
    CHECK(sol.objective >= previous - 1e-7 * (1.0 + std::abs(previous)));
    previous = sol.objective;
  }
  previous = qp::kInf;
  for (double eps : {0.01, 0.05, 0.1, 0.3}) {
    const auto sol = solve_dispatch(build_ced(inst.network, forecast(inst.netload, 5.0), eps, GaussianModel{}, inst.horizon));
    REQUIRE(sol.optimal());
    CHECK(sol.objective <= previous + 1e-7 * (1.0 + std::abs(previous)));
    previous = sol.objective;
  }
}

TEST_CASE("ced: epsilon outside (0,1) is rejected") {
  Network n = fixture::buses(1);
  n.generators.push_back(fixture::linear_gen(0, 20.0, 100.0));
  CHECK_THROWS_AS(build_ced(fixture::share(n), forecast(row({1.0}), 1.0), 0.0, GaussianModel{}, 1), RangeError);
}

TEST_CASE("lmp: congestion separates prices by the line dual") {
  Network n = fixture::buses(2);
  n.lines.push_back({0, 1, 1.0, 60.0, "tie"});
  n.generators.push_back(fixture::linear_gen(0, 10.0, 500.0));
  n.generators.push_back(fixture::linear_gen(1, 30.0, 500.0));
  const auto net = fixture::share(n);
  Eigen::MatrixXd d(2, 1);
  d << 0.0, 100.0;
  const auto sol = solve_dispatch(build_oed(net, d, 1));
  REQUIRE(sol.optimal());
  CHECK(sol.g(0, 0) == doctest::Approx(60.0).epsilon(1e-7));
  CHECK(sol.lmp(0, 0) == doctest::Approx(10.0).epsilon(1e-6));
  CHECK(sol.lmp(1, 0) == doctest::Approx(30.0).epsilon(1e-6));
  // Slack is bus 0, so ptdf(tie, 1) = -1 and the split is carried by omega.
  const double spread = net->ptdf(0, 0) - net->ptdf(0, 1);
  CHECK(sol.lmp(1, 0) - sol.lmp(0, 0) ==
        doctest::Approx(spread * (sol.duals.omega_hi(0, 0) - sol.duals.omega_lo(0, 0))).epsilon(1e-6));
}

TEST_CASE("lmp: uncongested network has a single price") {
  std::mt19937_64 rng(3);
  Network n = fixture::random_network(rng, 4, 2);
  n.generators.push_back(fixture::quadratic_gen(0, 0.02, 15.0, 500.0));
  n.generators.push_back(fixture::quadratic_gen(3, 0.01, 25.0, 500.0));
  const auto net = fixture::share(n);
  const Eigen::MatrixXd d = Eigen::MatrixXd::Constant(4, 2, 30.0);
  const auto sol = solve_dispatch(build_oed(net, d, 2));
  REQUIRE(sol.optimal());
  for (int t = 0; t < 2; ++t) {
    CHECK((sol.lmp.col(t).array() - sol.duals.lambda[t]).abs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("dispatch: storage KKT relations hold at the optimum") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 6; ++trial) {
    const auto inst = fixture::random_instance(rng, trial % 3 == 0 ? 3 : 1);
    const auto P = build_ced(inst.network, forecast(inst.netload, 4.0), 0.05, GaussianModel{}, inst.horizon);
    const auto sol = solve_dispatch(P);
    if (!sol.optimal()) continue;
    const auto kkt = storage_kkt_residuals(P, sol);
    CHECK(kkt.soc_stationarity < 1e-6);
    CHECK(kkt.discharge_stationarity < 1e-6);
    CHECK(kkt.charge_stationarity < 1e-6);
  }
}

TEST_CASE("complementarity: relaxed and exact agree with positive prices") {
  std::mt19937_64 rng(99);
  int compared = 0;
  for (int trial = 0; trial < 6; ++trial) {
    Network n = fixture::random_single_bus(rng, 2, 1);
    auto inst_net = fixture::share(n);
    Eigen::MatrixXd d = Eigen::MatrixXd::Constant(1, 4, 0.0);
    for (int t = 0; t < 4; ++t) d(0, t) = 50.0 + 40.0 * t * (t % 2 ? 1.0 : 0.5);
    auto P = build_oed(inst_net, d, 4);
    const auto relaxed = solve_dispatch(P);
    P.mode = ComplementarityMode::Exact;
    const auto exact = solve_dispatch(P);
    REQUIRE(relaxed.optimal());
    REQUIRE(exact.optimal());
    CHECK(std::abs(relaxed.objective - exact.objective) <= 1e-6 * (1.0 + std::abs(exact.objective)));
    ++compared;
  }
  CHECK(compared == 6);
}

TEST_CASE("complementarity: ramp-induced cycling is caught by exact mode") {
  const auto net = fixture::share(fixture::ramp_counterexample());
  auto P = build_oed(net, row({100.0, 60.0}), 2);
  const auto lp = solve(P);
  REQUIRE(lp.optimal());
  P.mode = ComplementarityMode::Exact;
  const auto exact = solve_dispatch(P);
  REQUIRE(exact.optimal());
  CHECK(exact.objective > lp.objective + 1e-3);
  for (int t = 0; t < 2; ++t) CHECK(exact.p(0, t) * exact.b(0, t) <= 1e-8);

  const double best = counterexample_oracle();
  CHECK(exact.objective == doctest::Approx(best).epsilon(1e-8));
}

TEST_CASE("complementarity: exact mode refuses large enumerations") {
  std::mt19937_64 rng(1);
  const auto inst = fixture::random_instance(rng, 1);
  Eigen::MatrixXd d(1, 7);
  for (int t = 0; t < 7; ++t) d(0, t) = inst.netload(0, t % inst.horizon);
  auto P = build_oed(inst.network, d, 7);
  P.mode = ComplementarityMode::Exact;
  // Force a violation so the enumeration path is taken.
  auto raw = solve(P);
  raw.p(0, 0) = raw.b(0, 0) = 1.0;
  CHECK_THROWS_AS(resolve_complementarity(P, raw), RangeError);
}

TEST_CASE("hindsight marginal cost arithmetic") {
  DispatchSolution sol;
  sol.duals.theta = Eigen::MatrixXd::Constant(1, 1, 20.0);
  const auto h = hindsight_marginal_cost(sol, fixture::storage(0, 1, 1, 0.9, 10.0, 0), 0);
  CHECK(h.discharge[0] == doctest::Approx(10.0 + 20.0 / 0.9));
  CHECK(h.charge[0] == doctest::Approx(8.0));
  const auto lossless = hindsight_marginal_cost(sol, fixture::storage(0, 1, 1, 1.0, 0.0, 0), 0);
  CHECK(lossless.discharge[0] == doctest::Approx(20.0));
  CHECK(lossless.charge[0] == doctest::Approx(20.0));
}

TEST_CASE("dispatch: lp dump names every decision variable") {
  Network n = fixture::buses(1);
  n.generators.push_back(fixture::quadratic_gen(0, 0.01, 20.0, 100.0));
  n.storages.push_back(fixture::storage(0, 10.0, 100.0, 0.9, 1.0, 50.0));
  n.reserve_ratio = 0.1;
  const auto P = build_oed(fixture::share(n), row({50.0, 60.0}), 2);
  std::ostringstream a, b;
  write_problem(a, P);
  write_problem(b, P);
  CHECK(a.str() == b.str());
  for (const char* v : {"g_0_1", "p_0_2", "b_0_1", "e_0_2", "r_0_1"}) CHECK(a.str().find(v) != std::string::npos);
}
