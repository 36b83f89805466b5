#include "gridbound/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "gridbound/error.hpp"

namespace gridbound {

CostFunction CostFunction::quadratic(double c2, double c1, double c0) {
  CostFunction f;
  f.kind_ = Kind::Quadratic;
  f.c2_ = c2;
  f.c1_ = c1;
  f.c0_ = c0;
  return f;
}

CostFunction CostFunction::piecewise_linear(std::vector<Breakpoint> breakpoints) {
  if (breakpoints.size() < 2) {
    throw InputError("piecewise-linear cost needs at least two breakpoints");
  }
  CostFunction f;
  f.kind_ = Kind::PiecewiseLinear;
  f.breakpoints_ = std::move(breakpoints);
  return f;
}

std::vector<double> CostFunction::slopes() const {
  std::vector<double> out;
  for (std::size_t k = 1; k < breakpoints_.size(); ++k) {
    const double dx = breakpoints_[k].output - breakpoints_[k - 1].output;
    out.push_back((breakpoints_[k].cost - breakpoints_[k - 1].cost) / dx);
  }
  return out;
}

double CostFunction::operator()(double g) const {
  if (kind_ == Kind::Quadratic) return (c2_ * g + c1_) * g + c0_;

  const auto& bp = breakpoints_;
  const auto s = slopes();
  if (g <= bp.front().output) return bp.front().cost + s.front() * (g - bp.front().output);
  for (std::size_t k = 1; k < bp.size(); ++k) {
    if (g <= bp[k].output) return bp[k - 1].cost + s[k - 1] * (g - bp[k - 1].output);
  }
  return bp.back().cost + s.back() * (g - bp.back().output);
}

double CostFunction::marginal(double g) const {
  if (kind_ == Kind::Quadratic) return 2.0 * c2_ * g + c1_;
  const auto& bp = breakpoints_;
  const auto s = slopes();
  for (std::size_t k = 1; k < bp.size(); ++k) {
    if (g < bp[k].output) return s[k - 1];
  }
  return s.back();
}

std::vector<std::string> CostFunction::violations(double g_min, double /*g_max*/) const {
  std::vector<std::string> out;
  if (kind_ == Kind::Quadratic) {
    if (!(c2_ >= 0.0)) out.push_back("quadratic coefficient c2 must be >= 0");
    else if (!(c1_ + 2.0 * c2_ * g_min >= 0.0))
      out.push_back("marginal cost c1 + 2*c2*g_min must be >= 0");
    return out;
  }
  const auto& bp = breakpoints_;
  for (std::size_t k = 1; k < bp.size(); ++k) {
    if (!(bp[k].output > bp[k - 1].output)) {
      out.push_back("breakpoint outputs must be strictly increasing");
      return out;
    }
  }
  const auto s = slopes();
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!(s[k] >= 0.0)) {
      out.push_back("piecewise slopes must be >= 0");
      break;
    }
  }
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (s[k] < s[k - 1]) {
      out.push_back("piecewise slopes must be non-decreasing");
      break;
    }
  }
  return out;
}

std::vector<std::vector<int>> connected_components(const std::vector<Line>& lines, int bus_count) {
  std::vector<std::vector<int>> adjacency(bus_count);
  for (const auto& line : lines) {
    if (line.from_bus < 0 || line.from_bus >= bus_count || line.to_bus < 0 || line.to_bus >= bus_count)
      continue;
    adjacency[line.from_bus].push_back(line.to_bus);
    adjacency[line.to_bus].push_back(line.from_bus);
  }
  std::vector<int> label(bus_count, -1);
  std::vector<std::vector<int>> components;
  for (int root = 0; root < bus_count; ++root) {
    if (label[root] >= 0) continue;
    std::vector<int> members;
    std::queue<int> frontier;
    frontier.push(root);
    label[root] = static_cast<int>(components.size());
    while (!frontier.empty()) {
      const int n = frontier.front();
      frontier.pop();
      members.push_back(n);
      for (int m : adjacency[n]) {
        if (label[m] < 0) {
          label[m] = label[root];
          frontier.push(m);
        }
      }
    }
    std::sort(members.begin(), members.end());
    components.push_back(std::move(members));
  }
  return components;
}

Eigen::MatrixXd compute_ptdf(const std::vector<Line>& lines, int bus_count, int slack) {
  if (slack < 0 || slack >= bus_count) {
    throw InputError("slack bus " + std::to_string(slack) + " is not a bus id");
  }
  const auto components = connected_components(lines, bus_count);
  if (components.size() > 1) {
    std::ostringstream msg;
    msg << "network is disconnected; isolated component(s):";
    for (const auto& comp : components) {
      if (std::find(comp.begin(), comp.end(), slack) != comp.end()) continue;
      msg << " {";
      for (std::size_t k = 0; k < comp.size(); ++k) msg << (k ? "," : "") << comp[k];
      msg << "}";
    }
    throw TopologyError(msg.str());
  }

  // Reduced susceptance matrix with the slack row/column removed.
  const int reduced = bus_count - 1;
  auto reduce = [slack](int n) { return n < slack ? n : n - 1; };
  Eigen::MatrixXd b_reduced = Eigen::MatrixXd::Zero(reduced, reduced);
  for (const auto& line : lines) {
    const int f = line.from_bus;
    const int t = line.to_bus;
    const double b = line.susceptance;
    if (f != slack) b_reduced(reduce(f), reduce(f)) += b;
    if (t != slack) b_reduced(reduce(t), reduce(t)) += b;
    if (f != slack && t != slack) {
      b_reduced(reduce(f), reduce(t)) -= b;
      b_reduced(reduce(t), reduce(f)) -= b;
    }
  }

  Eigen::MatrixXd reactance = Eigen::MatrixXd::Zero(bus_count, bus_count);
  if (reduced > 0) {
    const Eigen::MatrixXd inverse =
        b_reduced.ldlt().solve(Eigen::MatrixXd::Identity(reduced, reduced));
    for (int i = 0; i < bus_count; ++i) {
      if (i == slack) continue;
      for (int j = 0; j < bus_count; ++j) {
        if (j == slack) continue;
        reactance(i, j) = inverse(reduce(i), reduce(j));
      }
    }
  }

  Eigen::MatrixXd ptdf(lines.size(), bus_count);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const auto& line = lines[l];
    ptdf.row(l) = line.susceptance * (reactance.row(line.from_bus) - reactance.row(line.to_bus));
  }
  return ptdf;
}

std::vector<Violation> validate_network(const Network& net) {
  std::vector<Violation> out;
  auto report = [&out](std::string entity, std::string rule, std::string message) {
    out.push_back({std::move(entity), std::move(rule), std::move(message)});
  };
  auto tag = [](const char* kind, std::size_t k) { return std::string(kind) + "[" + std::to_string(k) + "]"; };
  const int n = net.bus_count();
  auto bus_exists = [n](int id) { return id >= 0 && id < n; };

  if (n == 0) report("network", "no-buses", "network has no buses");
  for (std::size_t k = 0; k < net.buses.size(); ++k) {
    if (net.buses[k].id != static_cast<int>(k)) {
      report(tag("bus", k), "dense-ids", "bus ids must be 0..N-1 in order; found " + std::to_string(net.buses[k].id));
    }
  }
  if (n > 0 && !bus_exists(net.slack_bus)) {
    report("network", "slack-bus", "slack bus " + std::to_string(net.slack_bus) + " does not exist");
  }
  if (!(net.reserve_ratio >= 0.0 && net.reserve_ratio < 1.0)) {
    report("network", "reserve-ratio-range", "reserve_ratio must lie in [0, 1)");
  }
  if (!(net.step_hours > 0.0)) report("network", "step-hours", "step_hours must be > 0");

  for (std::size_t k = 0; k < net.lines.size(); ++k) {
    const auto& line = net.lines[k];
    if (!bus_exists(line.from_bus) || !bus_exists(line.to_bus)) {
      report(tag("line", k), "dangling-reference", "line endpoint refers to an unknown bus");
    } else if (line.from_bus == line.to_bus) {
      report(tag("line", k), "self-loop", "from_bus equals to_bus");
    }
    if (!(line.susceptance > 0.0)) report(tag("line", k), "susceptance-positive", "susceptance must be > 0");
    if (!(line.capacity >= 0.0)) report(tag("line", k), "capacity-nonnegative", "capacity must be >= 0");
  }

  for (std::size_t k = 0; k < net.generators.size(); ++k) {
    const auto& gen = net.generators[k];
    if (!bus_exists(gen.bus)) report(tag("generator", k), "dangling-reference", "generator bus does not exist");
    if (!(gen.g_min >= 0.0 && gen.g_min <= gen.g_max)) {
      report(tag("generator", k), "output-range", "require 0 <= g_min <= g_max");
    }
    if (!(gen.ramp_up >= 0.0 && gen.ramp_down >= 0.0)) {
      report(tag("generator", k), "ramp-nonnegative", "ramp limits must be >= 0");
    }
    for (const auto& msg : gen.cost.violations(gen.g_min, gen.g_max)) {
      report(tag("generator", k), "cost-convexity", msg);
    }
  }

  for (std::size_t k = 0; k < net.storages.size(); ++k) {
    const auto& st = net.storages[k];
    if (!bus_exists(st.bus)) report(tag("storage", k), "dangling-reference", "storage bus does not exist");
    if (!(st.power > 0.0)) report(tag("storage", k), "power-positive", "power must be > 0");
    if (!(st.efficiency > 0.0 && st.efficiency <= 1.0)) {
      report(tag("storage", k), "efficiency-range", "efficiency must lie in (0, 1]");
    }
    if (!(st.marginal_cost >= 0.0)) report(tag("storage", k), "marginal-cost-nonnegative", "marginal_cost must be >= 0");
    if (!(st.e_min <= st.e_max)) {
      report(tag("storage", k), "energy-range", "require e_min <= e_max");
    } else if (!(st.e_initial >= st.e_min && st.e_initial <= st.e_max)) {
      report(tag("storage", k), "initial-soc-range", "e_initial must lie in [e_min, e_max]");
    }
  }

  const bool lines_ok = std::all_of(net.lines.begin(), net.lines.end(), [&](const Line& l) {
    return bus_exists(l.from_bus) && bus_exists(l.to_bus);
  });
  if (n > 1 && lines_ok && connected_components(net.lines, n).size() > 1) {
    report("network", "connectivity", "bus graph is disconnected");
  }
  return out;
}

Network prepare_network(Network network) {
  const auto violations = validate_network(network);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "invalid network:";
    for (const auto& v : violations) msg << "\n  " << v.entity << " [" << v.rule << "]: " << v.message;
    throw InputError(msg.str());
  }
  network.ptdf = compute_ptdf(network.lines, network.bus_count(), network.slack_bus);
  return network;
}

namespace {

// C(b) - C(a) for a <= b.
double cost_increment(const CostFunction& cost, double a, double b) {
  if (cost.is_quadratic()) return (b - a) * (cost.c2() * (a + b) + cost.c1());
  const auto& bp = cost.breakpoints();
  const auto s = cost.slopes();
  const std::size_t segments = s.size();
  double total = 0.0;
  for (std::size_t k = 0; k < segments; ++k) {
    const double lo = k == 0 ? -std::numeric_limits<double>::infinity() : bp[k].output;
    const double hi = k + 1 == segments ? std::numeric_limits<double>::infinity() : bp[k + 1].output;
    const double overlap = std::min(b, hi) - std::max(a, lo);
    if (overlap > 0.0) total += s[k] * overlap;
  }
  return total;
}

}  // namespace

double discrete_second_derivative(const CostFunction& cost, double g, double dg,
                                  std::optional<std::pair<double, double>> range) {
  if (!(dg > 0.0)) throw RangeError("discrete_second_derivative: dg must be > 0");
  if (range && (g - dg < range->first - 1e-12 || g + dg > range->second + 1e-12)) {
    throw RangeError("discrete_second_derivative: [g-dg, g+dg] leaves the feasible range");
  }
  // Differences are accumulated from slopes rather than by subtracting
  // absolute costs, which would cancel badly for small dg.
  return (cost_increment(cost, g, g + dg) - cost_increment(cost, g - dg, g)) / (dg * dg);
}

}  // namespace gridbound
