#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gridbound/error.hpp"

namespace gridbound {

/// Per-node, per-period netload forecast (rows = buses, cols = periods).
struct NetloadForecast {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd std;

  int node_count() const { return static_cast<int>(mean.rows()); }
  int horizon() const { return static_cast<int>(mean.cols()); }
};

/// Throws InputError unless mean/std shapes agree and std >= 0.
void validate_forecast(const NetloadForecast& forecast);

// Normalized netload error models. Each supplies F^-1(1 - epsilon) for a
// zero-mean, unit-scale error.
struct GaussianModel {};

enum class RobustShape { NoAssumption, Symmetric, Unimodal, SymmetricUnimodal };

/// Distribution-free bound from Cantelli-type inequalities.
struct RobustModel {
  RobustShape shape = RobustShape::NoAssumption;
};

/// F(x) = (1 + exp(-a (x - c)))^(-b).
struct VersatileModel {
  double a = 1.0;
  double b = 1.0;
  double c = 0.0;
};

struct EmpiricalModel {
  std::vector<double> sorted_samples;
};

using UncertaintyModel = std::variant<GaussianModel, RobustModel, VersatileModel, EmpiricalModel>;

/// Parses "gaussian", "robust:na|s|u|su" or "versatile:a,b,c". Empirical
/// and fitted models need sample files; see io.hpp.
UncertaintyModel parse_model(const std::string& spec);
std::string describe(const UncertaintyModel& model);

/// F^-1(1 - epsilon) of the normalized model. Throws RangeError unless
/// 0 < epsilon < 1.
double inverse_cdf(const UncertaintyModel& model, double epsilon);

double standard_normal_quantile(double p);
double standard_normal_cdf(double x);

double versatile_cdf(const VersatileModel& m, double x);
double versatile_quantile(const VersatileModel& m, double p);
double versatile_log_likelihood(const VersatileModel& m, std::span<const double> samples);

/// Smallest sample whose empirical CDF reaches q (1-based index ceil(q n)).
double empirical_quantile(std::span<const double> sorted_samples, double q);

class VersatileFitError : public Error {
 public:
  VersatileFitError(const std::string& what, VersatileModel best) : Error(what), best_(best) {}
  const VersatileModel& best() const { return best_; }

 private:
  VersatileModel best_;
};

struct VersatileFit {
  VersatileModel model;
  double log_likelihood = 0.0;
  double initial_log_likelihood = 0.0;
  int iterations = 0;
};

/// Maximum-likelihood fit of the versatile distribution. Quasi-Newton (BFGS)
/// on (log a, log b, c) from a logistic moment match; 500 iterations max,
/// 1e-8 tolerance on the log-likelihood.
VersatileFit fit_versatile(std::span<const double> samples);

/// Counter-based stream: the generator for (seed, index) does not depend on
/// how many other streams were drawn before it.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t index);
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

/// One normalized draw Z from the model (Robust draws are Gaussian).
double sample_normalized(const UncertaintyModel& model, RandomStream& rng);

struct ScenarioSet {
  std::vector<Eigen::MatrixXd> da_scenarios;
  /// rt_samples[k] holds the realizations for da_scenarios[k].
  std::vector<std::vector<Eigen::MatrixXd>> rt_samples;
  std::uint64_t seed = 0;
};

/// `count` realizations mu + sigma * Z for a single DA scenario (the forecast
/// mean). Sample j uses stream (seed, j).
ScenarioSet sample_netload(const NetloadForecast& forecast, const UncertaintyModel& model, int count,
                           std::uint64_t seed);

/// Realization for one stream; shared by sample_netload and the experiment.
Eigen::MatrixXd sample_realization(const NetloadForecast& forecast, const UncertaintyModel& model,
                                   RandomStream& rng);

}  // namespace gridbound
