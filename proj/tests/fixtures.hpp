#pragma once

#include <memory>
#include <random>

#include "gridbound/grid.hpp"

namespace fixture {

using namespace gridbound;

inline Generator quadratic_gen(int bus, double c2, double c1, double g_max, double g_min = 0.0) {
  Generator g;
  g.bus = bus;
  g.cost = CostFunction::quadratic(c2, c1);
  g.g_min = g_min;
  g.g_max = g_max;
  g.ramp_up = g.ramp_down = g_max;
  return g;
}

inline Generator linear_gen(int bus, double price, double g_max) { return quadratic_gen(bus, 0.0, price, g_max); }

inline Storage storage(int bus, double power, double e_max, double eta, double m, double e0, double e_min = 0.0) {
  Storage s;
  s.bus = bus;
  s.power = power;
  s.e_min = e_min;
  s.e_max = e_max;
  s.efficiency = eta;
  s.marginal_cost = m;
  s.e_initial = e0;
  return s;
}

inline Network buses(int count) {
  Network n;
  for (int k = 0; k < count; ++k) n.buses.push_back({k, "bus" + std::to_string(k)});
  n.slack_bus = 0;
  return n;
}

inline std::shared_ptr<const Network> share(Network n) {
  return std::make_shared<const Network>(prepare_network(std::move(n)));
}

// Random single-bus system with strictly convex quadratic units so LMPs are
// positive and unique.
inline Network random_single_bus(std::mt19937_64& rng, int gens, int stores) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Network n = buses(1);
  for (int i = 0; i < gens; ++i) n.generators.push_back(quadratic_gen(0, 0.005 + 0.03 * U(rng), 10.0 + 30.0 * U(rng), 150.0 + 100.0 * U(rng)));
  for (int s = 0; s < stores; ++s) {
    const double e_max = 20.0 + 40.0 * U(rng);
    n.storages.push_back(storage(0, 5.0 + 15.0 * U(rng), e_max, 0.85 + 0.14 * U(rng), 1.0 + 5.0 * U(rng), e_max * U(rng)));
  }
  return n;
}

// Random connected network: a spanning tree plus extra edges.
inline Network random_network(std::mt19937_64& rng, int bus_count, int extra_lines) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Network n = buses(bus_count);
  for (int k = 1; k < bus_count; ++k) {
    const int parent = static_cast<int>(U(rng) * k);
    n.lines.push_back({parent, k, 1.0 + 4.0 * U(rng), 1e4, ""});
  }
  for (int e = 0; e < extra_lines; ++e) {
    const int a = static_cast<int>(U(rng) * bus_count);
    int b = static_cast<int>(U(rng) * bus_count);
    if (a == b) b = (b + 1) % bus_count;
    n.lines.push_back({a, b, 1.0 + 4.0 * U(rng), 1e4, ""});
  }
  return n;
}

}  // namespace fixture

namespace fixture {

// One bus, two periods. Gen A is cheap but can ramp down only 10 MWh; the
// drop in netload forces storage to absorb energy, which pays to cycle
// through losses when p and b may both be positive.
inline Network ramp_counterexample() {
  Network n = buses(1);
  Generator a = linear_gen(0, 10.0, 100.0);
  a.ramp_down = 10.0;
  n.generators.push_back(a);
  n.generators.push_back(linear_gen(0, 50.0, 200.0));
  n.storages.push_back(storage(0, 200.0, 9.0, 0.9, 1.0, 0.0));
  return n;
}

struct Instance {
  std::shared_ptr<const Network> network;
  Eigen::MatrixXd netload;
  int horizon = 0;
};

// Feasible random instance with positive prices: demand stays within half
// of the fleet capacity.
inline Instance random_instance(std::mt19937_64& rng, int bus_count) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Network n = bus_count == 1 ? buses(1) : random_network(rng, bus_count, 1);
  std::mt19937_64 local(rng());
  Network sb = random_single_bus(local, 3, 2);
  for (auto g : sb.generators) {
    g.bus = static_cast<int>(U(rng) * bus_count);
    n.generators.push_back(g);
  }
  for (auto s : sb.storages) {
    s.bus = static_cast<int>(U(rng) * bus_count);
    n.storages.push_back(s);
  }
  for (auto& l : n.lines) l.capacity = 60.0 + 200.0 * U(rng);
  n.reserve_ratio = 0.05 * U(rng);
  double capacity = 0.0;
  for (const auto& g : n.generators) capacity += g.g_max;
  Instance inst;
  inst.horizon = 4 + static_cast<int>(U(rng) * 3);
  inst.netload = Eigen::MatrixXd::Zero(bus_count, inst.horizon);
  for (int t = 0; t < inst.horizon; ++t) {
    const double total = capacity * (0.15 + 0.3 * U(rng));
    for (int b = 0; b < bus_count; ++b) inst.netload(b, t) = total / bus_count;
  }
  inst.network = share(std::move(n));
  return inst;
}

}  // namespace fixture
