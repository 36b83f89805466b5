#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gridbound/error.hpp"
#include "gridbound/uncertainty.hpp"
#include "oracles.hpp"

using namespace gridbound;

TEST_CASE("inverse_cdf: robust closed forms") {
  CHECK(inverse_cdf(RobustModel{RobustShape::NoAssumption}, 0.05) == doctest::Approx(std::sqrt(19.0)).epsilon(1e-12));
  CHECK(inverse_cdf(RobustModel{RobustShape::Symmetric}, 0.6) == 0.0);
  CHECK(inverse_cdf(RobustModel{RobustShape::Symmetric}, 0.05) == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));
  CHECK(inverse_cdf(RobustModel{RobustShape::Unimodal}, 0.1) ==
        doctest::Approx(std::sqrt((4.0 - 0.9) / 0.9)).epsilon(1e-12));
  CHECK(inverse_cdf(RobustModel{RobustShape::Unimodal}, 0.5) ==
        doctest::Approx(std::sqrt(1.5 / 2.5)).epsilon(1e-12));
  CHECK(inverse_cdf(RobustModel{RobustShape::SymmetricUnimodal}, 0.1) ==
        doctest::Approx(std::sqrt(2.0 / 0.9)).epsilon(1e-12));
  CHECK(inverse_cdf(RobustModel{RobustShape::SymmetricUnimodal}, 0.25) ==
        doctest::Approx(std::sqrt(3.0) * 0.5).epsilon(1e-12));
  CHECK(inverse_cdf(RobustModel{RobustShape::SymmetricUnimodal}, 0.75) == 0.0);
}

TEST_CASE("inverse_cdf: gaussian and versatile") {
  CHECK(inverse_cdf(GaussianModel{}, 0.05) == doctest::Approx(oracle::normal_quantile(0.95)).epsilon(1e-10));
  CHECK(inverse_cdf(GaussianModel{}, 0.05) == doctest::Approx(1.6449).epsilon(1e-4));
  CHECK(std::abs(inverse_cdf(VersatileModel{1.0, 1.0, 0.0}, 0.5)) < 1e-15);
  const VersatileModel m{2.0, 0.7, 1.5};
  for (double eps : {0.01, 0.1, 0.3, 0.7, 0.95}) {
    CHECK(versatile_cdf(m, inverse_cdf(m, eps)) == doctest::Approx(1.0 - eps).epsilon(1e-9));
  }
}

TEST_CASE("inverse_cdf: epsilon outside (0,1) is rejected") {
  for (double eps : {0.0, 1.0, -0.1, 1.5}) CHECK_THROWS_AS(inverse_cdf(GaussianModel{}, eps), RangeError);
}

TEST_CASE("inverse_cdf: non-increasing in epsilon for every model") {
  std::vector<double> samples(200);
  for (int k = 0; k < 200; ++k) samples[k] = -2.0 + 0.02 * k;
  const std::vector<UncertaintyModel> models = {
      GaussianModel{}, RobustModel{RobustShape::NoAssumption}, RobustModel{RobustShape::Symmetric},
      RobustModel{RobustShape::Unimodal}, RobustModel{RobustShape::SymmetricUnimodal}, VersatileModel{1.3, 0.8, 0.2},
      EmpiricalModel{samples}};
  for (const auto& m : models) {
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k < 100; ++k) {
      const double z = inverse_cdf(m, 0.01 * k);
      INFO(describe(m), " eps ", 0.01 * k);
      CHECK(z <= prev + 1e-12);
      prev = z;
    }
  }
}

TEST_CASE("inverse_cdf: robust dominance on (0, 1/2]") {
  for (int k = 1; k <= 500; ++k) {
    const double eps = 0.001 * k;
    const double na = inverse_cdf(RobustModel{RobustShape::NoAssumption}, eps);
    const double s = inverse_cdf(RobustModel{RobustShape::Symmetric}, eps);
    const double u = inverse_cdf(RobustModel{RobustShape::Unimodal}, eps);
    const double su = inverse_cdf(RobustModel{RobustShape::SymmetricUnimodal}, eps);
    CHECK(na >= s - 1e-12);
    CHECK(s >= su - 1e-12);
    CHECK(na >= u - 1e-12);
  }
}

TEST_CASE("empirical_quantile: ceiling order statistic") {
  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);
  CHECK(empirical_quantile(hundred, 0.95) == 95.0);
  CHECK(empirical_quantile(std::vector<double>{7.0}, 0.3) == 7.0);
  CHECK(empirical_quantile(std::vector<double>{1.0, 2.0, 3.0, 4.0}, 0.5) == 2.0);
  CHECK_THROWS_AS(empirical_quantile(std::vector<double>{}, 0.5), InputError);
  for (int k = 1; k < 100; ++k) {
    const double v = empirical_quantile(hundred, 0.01 * k + 0.003);
    CHECK(std::find(hundred.begin(), hundred.end(), v) != hundred.end());
  }
}

TEST_CASE("fit_versatile: recovers the generating parameters") {
  const VersatileModel truth{1.0, 1.0, 0.0};
  RandomStream rng(17, 0);
  std::vector<double> samples(5000);
  for (auto& x : samples) x = versatile_quantile(truth, rng.uniform());
  const auto fit = fit_versatile(samples);
  CHECK(std::abs(fit.model.a - 1.0) < 0.1);
  CHECK(std::abs(fit.model.b - 1.0) < 0.1);
  CHECK(std::abs(fit.model.c) < 0.1);
  CHECK(fit.log_likelihood >= fit.initial_log_likelihood);

  std::sort(samples.begin(), samples.end());
  const double sample_median = 0.5 * (samples[2499] + samples[2500]);
  CHECK(std::abs(versatile_quantile(fit.model, 0.5) - sample_median) < 0.05);
}

TEST_CASE("fit_versatile: constant data is degenerate") {
  CHECK_THROWS_AS(fit_versatile(std::vector<double>(50, 3.0)), InputError);
  CHECK_THROWS_AS(fit_versatile(std::vector<double>(10, 1.0)), InputError);
}

TEST_CASE("sample_netload: determinism, zero sigma and mean") {
  NetloadForecast f{Eigen::MatrixXd::Constant(2, 3, 50.0), Eigen::MatrixXd::Zero(2, 3)};
  const auto flat = sample_netload(f, GaussianModel{}, 5, 9);
  for (const auto& s : flat.rt_samples[0]) CHECK((s - f.mean).cwiseAbs().maxCoeff() == 0.0);

  f.std.setConstant(4.0);
  const auto a = sample_netload(f, GaussianModel{}, 20, 123);
  const auto b = sample_netload(f, GaussianModel{}, 20, 123);
  for (int k = 0; k < 20; ++k) CHECK((a.rt_samples[0][k] - b.rt_samples[0][k]).cwiseAbs().maxCoeff() == 0.0);

  const int n = 10000;
  const auto big = sample_netload(f, GaussianModel{}, n, 5);
  double sum = 0.0;
  for (const auto& s : big.rt_samples[0]) sum += s(1, 2);
  CHECK(std::abs(sum / n - 50.0) <= 4.0 * 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("random streams do not depend on draw order") {
  RandomStream a(42, 7);
  RandomStream warm(42, 3);
  for (int k = 0; k < 100; ++k) warm.normal();
  RandomStream b(42, 7);
  for (int k = 0; k < 10; ++k) CHECK(a.normal() == b.normal());
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}

TEST_CASE("parse_model: spellings") {
  CHECK(std::holds_alternative<GaussianModel>(parse_model("gaussian")));
  CHECK(std::get<RobustModel>(parse_model("robust:su")).shape == RobustShape::SymmetricUnimodal);
  CHECK(std::get<VersatileModel>(parse_model("versatile:2,0.5,1")).b == 0.5);
  CHECK_THROWS_AS(parse_model("cauchy"), InputError);
  CHECK_THROWS_AS(parse_model("robust:xx"), InputError);
}
