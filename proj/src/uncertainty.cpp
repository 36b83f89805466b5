#include "gridbound/uncertainty.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace gridbound {

void validate_forecast(const NetloadForecast& f) {
  if (f.mean.rows() != f.std.rows() || f.mean.cols() != f.std.cols()) {
    throw InputError("forecast mean and std shapes differ");
  }
  if ((f.std.array() < 0.0).any()) throw InputError("forecast std must be >= 0");
  if (!f.mean.allFinite() || !f.std.allFinite()) throw InputError("forecast contains non-finite values");
}

UncertaintyModel parse_model(const std::string& spec) {
  std::string lower = spec;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "gaussian" || lower == "normal") return GaussianModel{};
  if (lower.rfind("robust:", 0) == 0) {
    const std::string shape = lower.substr(7);
    if (shape == "na") return RobustModel{RobustShape::NoAssumption};
    if (shape == "s") return RobustModel{RobustShape::Symmetric};
    if (shape == "u") return RobustModel{RobustShape::Unimodal};
    if (shape == "su") return RobustModel{RobustShape::SymmetricUnimodal};
    throw InputError("unknown robust shape '" + shape + "' (expected na, s, u or su)");
  }
  if (lower.rfind("versatile:", 0) == 0) {
    std::istringstream in(lower.substr(10));
    std::array<double, 3> p{};
    std::string cell;
    for (int k = 0; k < 3; ++k) {
      if (!std::getline(in, cell, ',')) throw InputError("versatile model needs a,b,c");
      try {
        p[k] = std::stod(cell);
      } catch (const std::exception&) {
        throw InputError("versatile parameter is not a number: '" + cell + "'");
      }
    }
    if (!(p[0] > 0.0 && p[1] > 0.0)) throw InputError("versatile parameters a and b must be > 0");
    return VersatileModel{p[0], p[1], p[2]};
  }
  throw InputError("unknown uncertainty model '" + spec + "'");
}

std::string describe(const UncertaintyModel& model) {
  struct Visitor {
    std::string operator()(const GaussianModel&) const { return "gaussian"; }
    std::string operator()(const RobustModel& m) const {
      switch (m.shape) {
        case RobustShape::NoAssumption: return "robust:na";
        case RobustShape::Symmetric: return "robust:s";
        case RobustShape::Unimodal: return "robust:u";
        case RobustShape::SymmetricUnimodal: return "robust:su";
      }
      return "robust";
    }
    std::string operator()(const VersatileModel& m) const {
      std::ostringstream out;
      out.precision(17);
      out << "versatile:" << m.a << "," << m.b << "," << m.c;
      return out.str();
    }
    std::string operator()(const EmpiricalModel& m) const {
      return "empirical(" + std::to_string(m.sorted_samples.size()) + " samples)";
    }
  };
  return std::visit(Visitor{}, model);
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double standard_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw RangeError("normal quantile requires 0 < p < 1");
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double low = 0.02425;
  double x = 0.0;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = standard_normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

namespace {

double robust_quantile(RobustShape shape, double eps) {
  switch (shape) {
    case RobustShape::NoAssumption:
      return std::sqrt((1.0 - eps) / eps);
    case RobustShape::Symmetric:
      return eps <= 0.5 ? std::sqrt(1.0 / (2.0 * eps)) : 0.0;
    case RobustShape::Unimodal:
      return eps <= 1.0 / 6.0 ? std::sqrt((4.0 - 9.0 * eps) / (9.0 * eps))
                              : std::sqrt((3.0 - 3.0 * eps) / (1.0 + 3.0 * eps));
    case RobustShape::SymmetricUnimodal:
      if (eps <= 1.0 / 6.0) return std::sqrt(2.0 / (9.0 * eps));
      if (eps <= 0.5) return std::sqrt(3.0) * (1.0 - 2.0 * eps);
      return 0.0;
  }
  return 0.0;
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// 1 / (1 + exp(x)).
double logistic_complement(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

}  // namespace

double inverse_cdf(const UncertaintyModel& model, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw RangeError("epsilon must lie in (0, 1); got " + std::to_string(epsilon));
  }
  struct Visitor {
    double eps;
    double operator()(const GaussianModel&) const { return standard_normal_quantile(1.0 - eps); }
    double operator()(const RobustModel& m) const { return robust_quantile(m.shape, eps); }
    double operator()(const VersatileModel& m) const { return versatile_quantile(m, 1.0 - eps); }
    double operator()(const EmpiricalModel& m) const { return empirical_quantile(m.sorted_samples, 1.0 - eps); }
  };
  return std::visit(Visitor{epsilon}, model);
}

double versatile_cdf(const VersatileModel& m, double x) {
  return std::exp(-m.b * softplus(-m.a * (x - m.c)));
}

double versatile_quantile(const VersatileModel& m, double p) {
  if (!(p > 0.0 && p < 1.0)) throw RangeError("versatile quantile requires 0 < p < 1");
  // p^(-1/b) - 1 computed as expm1 to keep precision near p = 1.
  return m.c - std::log(std::expm1(-std::log(p) / m.b)) / m.a;
}

double versatile_log_likelihood(const VersatileModel& m, std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  double sum_z = 0.0;
  double sum_sp = 0.0;
  for (double x : xs) {
    const double z = m.a * (x - m.c);
    sum_z += z;
    sum_sp += softplus(-z);
  }
  return n * std::log(m.a) + n * std::log(m.b) - sum_z - (m.b + 1.0) * sum_sp;
}

double empirical_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InputError("empirical_quantile: no samples");
  if (!(q > 0.0 && q < 1.0)) throw RangeError("empirical_quantile: q must lie in (0, 1)");
  const double n = static_cast<double>(sorted.size());
  // Guard against q*n landing a rounding error above an integer.
  long k = static_cast<long>(std::ceil(q * n * (1.0 - 1e-12)));
  k = std::clamp<long>(k, 1, static_cast<long>(sorted.size()));
  return sorted[static_cast<std::size_t>(k - 1)];
}

namespace {

using Vec3 = Eigen::Vector3d;

// Negative log-likelihood and gradient in (log a, log b, c).
double versatile_objective(const Vec3& p, std::span<const double> xs, Vec3& grad) {
  const double a = std::exp(p[0]);
  const double b = std::exp(p[1]);
  const double c = p[2];
  const double n = static_cast<double>(xs.size());
  double sum_z = 0.0, sum_sp = 0.0, sum_s = 0.0, sum_dx = 0.0, sum_s_dx = 0.0;
  for (double x : xs) {
    const double dx = x - c;
    const double z = a * dx;
    const double s = logistic_complement(z);
    sum_z += z;
    sum_sp += softplus(-z);
    sum_s += s;
    sum_dx += dx;
    sum_s_dx += s * dx;
  }
  const double ll = n * std::log(a) + n * std::log(b) - sum_z - (b + 1.0) * sum_sp;
  const double d_a = n / a - sum_dx + (b + 1.0) * sum_s_dx;
  const double d_b = n / b - sum_sp;
  const double d_c = n * a - (b + 1.0) * a * sum_s;
  grad = -Vec3(a * d_a, b * d_b, d_c);
  return -ll;
}

}  // namespace

VersatileFit fit_versatile(std::span<const double> samples) {
  if (samples.size() < 30) throw InputError("fit_versatile needs at least 30 samples");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var /= n;
  if (!(var > 1e-300) || !std::isfinite(var)) throw InputError("fit_versatile: degenerate (constant) samples");

  // Logistic moment match: b = 1, var = pi^2 / (3 a^2).
  const double a0 = std::numbers::pi / std::sqrt(3.0 * var);
  Vec3 p(std::log(a0), 0.0, mean);
  Vec3 grad;
  double f = versatile_objective(p, samples, grad);
  const double f0 = f;

  Eigen::Matrix3d inv_hessian = Eigen::Matrix3d::Identity() / n;
  constexpr int max_iterations = 500;
  constexpr double tolerance = 1e-8;
  int iter = 0;
  bool converged = false;
  for (; iter < max_iterations; ++iter) {
    if (grad.cwiseAbs().maxCoeff() < 1e-9 * n) {
      converged = true;
      break;
    }
    Vec3 dir = -inv_hessian * grad;
    if (dir.dot(grad) >= 0.0) {
      inv_hessian = Eigen::Matrix3d::Identity() / n;
      dir = -grad / n;
    }
    double step = 1.0;
    Vec3 trial_grad;
    double trial_f = 0.0;
    Vec3 trial;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = p + step * dir;
      trial_f = versatile_objective(trial, samples, trial_grad);
      if (std::isfinite(trial_f) && trial_f <= f + 1e-4 * step * dir.dot(grad)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Vec3 s = trial - p;
    const Vec3 y = trial_grad - grad;
    const double improvement = f - trial_f;
    p = trial;
    f = trial_f;
    grad = trial_grad;
    const double sy = s.dot(y);
    if (sy > 1e-14) {
      const double rho = 1.0 / sy;
      const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
      inv_hessian = (id - rho * s * y.transpose()) * inv_hessian * (id - rho * y * s.transpose()) +
                    rho * s * s.transpose();
    }
    if (improvement < tolerance && grad.cwiseAbs().maxCoeff() < 1e-5 * n) {
      converged = true;
      ++iter;
      break;
    }
  }

  VersatileModel model{std::exp(p[0]), std::exp(p[1]), p[2]};
  if (!converged) {
    throw VersatileFitError("fit_versatile did not converge after " + std::to_string(iter) + " iterations", model);
  }
  return VersatileFit{model, -f, -f0, iter};
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over seed xor a spread-out index.
  std::uint64_t z = seed ^ (index * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t index) : engine_(mix_seed(seed, index)) {}

double RandomStream::uniform() {
  return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() { return standard_normal_quantile(uniform()); }

double sample_normalized(const UncertaintyModel& model, RandomStream& rng) {
  struct Visitor {
    RandomStream& rng;
    double operator()(const GaussianModel&) const { return rng.normal(); }
    double operator()(const RobustModel&) const { return rng.normal(); }
    double operator()(const VersatileModel& m) const { return versatile_quantile(m, rng.uniform()); }
    double operator()(const EmpiricalModel& m) const {
      if (m.sorted_samples.empty()) throw InputError("empirical model has no samples");
      const auto k = static_cast<std::size_t>(rng.next() % m.sorted_samples.size());
      return m.sorted_samples[k];
    }
  };
  return std::visit(Visitor{rng}, model);
}

Eigen::MatrixXd sample_realization(const NetloadForecast& forecast, const UncertaintyModel& model,
                                   RandomStream& rng) {
  Eigen::MatrixXd out = forecast.mean;
  for (Eigen::Index t = 0; t < out.cols(); ++t) {
    for (Eigen::Index n = 0; n < out.rows(); ++n) {
      const double z = sample_normalized(model, rng);
      out(n, t) += forecast.std(n, t) * z;
    }
  }
  return out;
}

ScenarioSet sample_netload(const NetloadForecast& forecast, const UncertaintyModel& model, int count,
                           std::uint64_t seed) {
  if (count < 1) throw RangeError("sample_netload: count must be >= 1");
  validate_forecast(forecast);
  ScenarioSet set;
  set.seed = seed;
  set.da_scenarios.push_back(forecast.mean);
  set.rt_samples.emplace_back();
  auto& samples = set.rt_samples.back();
  samples.reserve(count);
  for (int j = 0; j < count; ++j) {
    RandomStream rng(seed, static_cast<std::uint64_t>(j));
    samples.push_back(sample_realization(forecast, model, rng));
  }
  return set;
}

}  // namespace gridbound
