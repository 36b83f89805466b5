#pragma once

#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gridbound::qp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Convex quadratic program with a diagonal Hessian:
///
///   min  0.5 * sum_j q_j x_j^2 + c^T x + constant
///   s.t. row_lower <= A x <= row_upper
///        lower <= x <= upper
///
/// Rows with equal finite bounds are equalities.
class Problem {
 public:
  struct Entry {
    int column = 0;
    double value = 0.0;
  };

  int add_variable(std::string name, double lower, double upper, double linear = 0.0, double quadratic = 0.0);
  int add_row(std::string name, double lower, double upper, std::vector<Entry> entries);

  void set_bounds(int column, double lower, double upper);
  void set_linear(int column, double c) { linear_[column] = c; }
  void set_row_bounds(int row, double lower, double upper);
  void add_constant(double c) { constant_ += c; }

  int variable_count() const { return static_cast<int>(lower_.size()); }
  int row_count() const { return static_cast<int>(row_lower_.size()); }

  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<double>& linear() const { return linear_; }
  const std::vector<double>& quadratic() const { return quadratic_; }
  const std::vector<std::string>& variable_names() const { return var_names_; }
  const std::vector<double>& row_lower() const { return row_lower_; }
  const std::vector<double>& row_upper() const { return row_upper_; }
  const std::vector<std::string>& row_names() const { return row_names_; }
  const std::vector<Entry>& row(int r) const { return rows_[r]; }
  double constant() const { return constant_; }

  double objective(std::span<const double> x) const;
  double row_activity(int r, std::span<const double> x) const;

 private:
  std::vector<double> lower_, upper_, linear_, quadratic_;
  std::vector<std::string> var_names_;
  std::vector<double> row_lower_, row_upper_;
  std::vector<std::string> row_names_;
  std::vector<std::vector<Entry>> rows_;
  double constant_ = 0.0;
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(Status status);

/// Primal-dual solution. Multipliers follow the Lagrangian
///   L = f(x) + sum_r y_r (a_r x - rhs_r) - z_lo^T (x - l) + z_hi^T (x - u)
/// where y_r = row_dual_upper - row_dual_lower; all split multipliers are >= 0.
struct Solution {
  Status status = Status::IterationLimit;
  std::vector<double> x;
  double objective = 0.0;
  std::vector<double> row_dual;
  std::vector<double> row_dual_lower;
  std::vector<double> row_dual_upper;
  std::vector<double> bound_dual_lower;
  std::vector<double> bound_dual_upper;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double relative_gap = 0.0;
};

struct Options {
  int max_iterations = 200;
  double tolerance = 1e-12;
  /// Re-solve on the identified active set to land on an exact face.
  bool polish = true;
  bool verbose = false;
};

/// Mehrotra predictor-corrector interior-point method on the sparse
/// quasi-definite augmented system.
Solution solve(const Problem& problem, const Options& options = {});

/// Lagrangian dual objective evaluated at the solution's multipliers.
double dual_objective(const Problem& problem, const Solution& solution);

/// Worst |multiplier * slack| over all finite row and bound sides.
double complementarity_residual(const Problem& problem, const Solution& solution);

/// Infinity norm of the stationarity residual Qx + c + A^T y - z_lo + z_hi.
double stationarity_residual(const Problem& problem, const Solution& solution);

/// CPLEX-LP textual export. Numbers use shortest round-trip formatting so
/// the text is bit-exact for a given problem.
void write_lp(std::ostream& out, const Problem& problem, const std::string& comment = {});

}  // namespace gridbound::qp
