#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gridbound {

struct Bus {
  int id = 0;
  std::string name;
};

/// Transmission line. `capacity` is MWh per dispatch step.
struct Line {
  int from_bus = 0;
  int to_bus = 0;
  double susceptance = 1.0;
  double capacity = 0.0;
  std::string name;
};

/// Convex, increasing production cost. Either a quadratic
/// c2*g^2 + c1*g + c0 or a piecewise-linear curve through breakpoints
/// (g, cost) with non-decreasing slopes.
class CostFunction {
 public:
  enum class Kind { Quadratic, PiecewiseLinear };
  struct Breakpoint {
    double output = 0.0;
    double cost = 0.0;
  };

  CostFunction() = default;

  static CostFunction quadratic(double c2, double c1, double c0 = 0.0);
  static CostFunction piecewise_linear(std::vector<Breakpoint> breakpoints);

  Kind kind() const { return kind_; }
  bool is_quadratic() const { return kind_ == Kind::Quadratic; }

  double c2() const { return c2_; }
  double c1() const { return c1_; }
  double c0() const { return c0_; }
  const std::vector<Breakpoint>& breakpoints() const { return breakpoints_; }

  /// Segment slopes of a piecewise-linear curve (size = breakpoints - 1).
  std::vector<double> slopes() const;

  /// Cost at output g. Piecewise curves are extended linearly past the
  /// first and last breakpoints.
  double operator()(double g) const;

  /// Right derivative at g.
  double marginal(double g) const;

  /// Convexity/monotonicity violations on [g_min, g_max]; empty if valid.
  std::vector<std::string> violations(double g_min, double g_max) const;

 private:
  Kind kind_ = Kind::Quadratic;
  double c2_ = 0.0;
  double c1_ = 0.0;
  double c0_ = 0.0;
  std::vector<Breakpoint> breakpoints_;
};

struct Generator {
  std::string name;
  int bus = 0;
  CostFunction cost;
  double g_min = 0.0;
  double g_max = 0.0;
  double ramp_up = 0.0;
  double ramp_down = 0.0;
};

/// Energy storage unit; power and energy are per dispatch step.
struct Storage {
  std::string name;
  int bus = 0;
  double power = 0.0;
  double e_min = 0.0;
  double e_max = 0.0;
  double efficiency = 1.0;
  double marginal_cost = 0.0;
  double e_initial = 0.0;
};

struct Network {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<Storage> storages;
  int slack_bus = 0;
  double reserve_ratio = 0.0;
  double step_hours = 1.0;
  /// |lines| x |buses|; filled by prepare_network().
  Eigen::MatrixXd ptdf;

  int bus_count() const { return static_cast<int>(buses.size()); }
  int line_count() const { return static_cast<int>(lines.size()); }
  int generator_count() const { return static_cast<int>(generators.size()); }
  int storage_count() const { return static_cast<int>(storages.size()); }
};

struct Violation {
  std::string entity;  // e.g. "storage[0]"
  std::string rule;    // e.g. "efficiency-range"
  std::string message;
};

/// Power transfer distribution factors relative to `slack`: entry (l, n) is
/// the flow on line l for a unit injection at n withdrawn at the slack.
/// Throws TopologyError naming the islanded buses if the graph is disconnected.
Eigen::MatrixXd compute_ptdf(const std::vector<Line>& lines, int bus_count, int slack);

/// Lists every broken type invariant. Never throws.
std::vector<Violation> validate_network(const Network& network);

/// Validates and fills the PTDF cache; throws InputError listing all
/// violations when the network is inconsistent.
Network prepare_network(Network network);

/// Connected components of the bus graph, each sorted ascending.
std::vector<std::vector<int>> connected_components(const std::vector<Line>& lines, int bus_count);

/// (C(g+dg) + C(g-dg) - 2C(g)) / dg^2 with [g-dg, g+dg] inside `range`.
double discrete_second_derivative(const CostFunction& cost, double g, double dg,
                                  std::optional<std::pair<double, double>> range = std::nullopt);

}  // namespace gridbound
