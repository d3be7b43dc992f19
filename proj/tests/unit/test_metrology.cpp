#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>

#include "qmag/metrology.hpp"
#include "support/oracles.hpp"

using namespace qmag;

namespace {

constexpr Complex kI{0.0, 1.0};

// Exact forward with per-node caching for grid sweeps.
ForwardModel cached_exact_forward(const SpinChainModel& base,
                                  ObservableAxis axis,
                                  const std::vector<double>& times) {
  auto cache =
      std::make_shared<std::map<std::vector<double>, std::vector<double>>>();
  return [=](const std::vector<double>& theta) {
    auto it = cache->find(theta);
    if (it != cache->end()) return it->second;
    auto values =
        exact_curve(base, CurveSource::Unitary, 0.0, axis, theta, times).values;
    (*cache)[theta] = values;
    return values;
  };
}

ComplexVector ghz_state(int n, double theta) {
  // exp(-i theta sum_k sz_k / 2) on (|0...0> + |1...1>)/sqrt(2)
  const int dim = 1 << n;
  ComplexVector psi = ComplexVector::Zero(dim);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  psi(0) = inv_sqrt2 * std::exp(-kI * (0.5 * n * theta));
  psi(dim - 1) = inv_sqrt2 * std::exp(kI * (0.5 * n * theta));
  return psi;
}

}  // namespace

TEST_CASE("theta-independent states carry zero information") {
  StateFn constant = [](double) {
    ComplexVector psi(2);
    psi << 1.0, 0.0;
    return psi;
  };
  QfiResult result = qfi_pure(constant, 0.3);
  CHECK(result.qfi == 0.0);
  CHECK(!result.bound.has_value());
}

TEST_CASE("single-qubit phase rotation has QFI 1") {
  StateFn rotation = [](double theta) {
    ComplexVector psi(2);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    psi << inv_sqrt2 * std::exp(-kI * (0.5 * theta)),
        inv_sqrt2 * std::exp(kI * (0.5 * theta));
    return psi;
  };
  QfiResult result = qfi_pure(rotation, 0.2);
  CHECK(result.qfi == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(*result.bound == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("GHZ states reach QFI = N^2") {
  for (int n : {2, 3}) {
    StateFn fn = [n](double theta) { return ghz_state(n, theta); };
    QfiResult result = qfi_pure(fn, 0.15);
    CHECK(result.qfi == doctest::Approx(n * n).epsilon(1e-6));
  }
}

TEST_CASE("QFI is invariant under a theta-dependent global phase") {
  StateFn fn = [](double theta) { return ghz_state(2, theta); };
  StateFn gauged = [](double theta) {
    return ComplexVector(std::exp(kI * (7.0 * theta)) * ghz_state(2, theta));
  };
  QfiResult plain = qfi_pure(fn, 0.15);
  QfiResult twisted = qfi_pure(gauged, 0.15);
  CHECK(std::abs(plain.qfi - twisted.qfi) < 1e-6);
}

TEST_CASE("states with a numerical noise floor are rejected with advice") {
  StateFn noisy = [](double theta) {
    // deterministic jitter far above the h^2 differencing scale
    const double jitter =
        1e-6 * std::sin(1e9 * theta);
    ComplexVector psi(2);
    psi << std::cos(0.3 + jitter), std::sin(0.3 + jitter);
    return psi;
  };
  CHECK_THROWS_WITH_AS(qfi_pure(noisy, 0.2, 1e-7),
                       doctest::Contains("disagree"), std::runtime_error);
}

TEST_CASE("cramer-rao bound values") {
  CHECK(*cramer_rao(1.0) == doctest::Approx(1.0));
  CHECK(*cramer_rao(4.0) == doctest::Approx(0.5));
  CHECK(!cramer_rao(0.0).has_value());
  CHECK_THROWS_AS(cramer_rao(-1.0), std::invalid_argument);
  // GHZ N=2 saturates the Heisenberg 1/N line
  StateFn fn = [](double theta) { return ghz_state(2, theta); };
  QfiResult result = qfi_pure(fn, 0.1);
  CHECK(*cramer_rao(result.qfi) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("chain state function feeds the QFI pipeline") {
  SpinChainModel base{4, 0.0, 0.0, 0.0};
  StateFn fn = chain_state_fn(base, ObservableAxis::X, 5.0);
  QfiResult result = qfi_pure(fn, 0.1, 1e-5);
  CHECK(result.qfi > 0.0);
  CHECK(result.bound.has_value());
}

TEST_CASE("exact power laws are recovered exactly") {
  std::vector<int> sizes = {4, 6, 8, 10};
  for (double alpha : {1.0, 0.5}) {
    std::vector<double> precisions;
    for (int n : sizes) {
      precisions.push_back(0.02 * std::pow(n, -alpha));
    }
    ScalingFit fit = fit_scaling(sizes, precisions);
    CHECK(fit.exponent == doctest::Approx(alpha).epsilon(1e-12));
    CHECK(fit.prefactor == doctest::Approx(0.02).epsilon(1e-10));
    for (double r : fit.residuals) {
      CHECK(std::abs(r) < 1e-12);
    }
  }
}

TEST_CASE("reference 1D precision column fits alpha near 1.13") {
  ScalingFit fit = fit_scaling({4, 6, 8}, {0.004513, 0.002850, 0.002062});
  CHECK(fit.exponent == doctest::Approx(1.1302772207029774).epsilon(1e-10));
  CHECK(fit.prefactor == doctest::Approx(0.021616601034181653).epsilon(1e-8));
}

TEST_CASE("rescaling all precisions moves only the prefactor") {
  std::vector<int> sizes = {4, 6, 8};
  std::vector<double> base = {0.004513, 0.002850, 0.002062};
  std::vector<double> scaled;
  for (double p : base) scaled.push_back(3.7 * p);
  ScalingFit a = fit_scaling(sizes, base);
  ScalingFit b = fit_scaling(sizes, scaled);
  CHECK(a.exponent == doctest::Approx(b.exponent).epsilon(1e-12));
  CHECK(b.prefactor == doctest::Approx(3.7 * a.prefactor).epsilon(1e-10));
}

TEST_CASE("degenerate scaling inputs are rejected") {
  CHECK_THROWS_AS(fit_scaling({4}, {0.01}), std::invalid_argument);
  CHECK_THROWS_AS(fit_scaling({4, 4}, {0.01, 0.02}), std::invalid_argument);
  CHECK_THROWS_AS(fit_scaling({4, 6}, {0.01, -0.02}), std::invalid_argument);
}

TEST_CASE("precision experiment needs a forward model per size") {
  std::map<int, ForwardModel> forwards;
  auto times = make_time_grid(5.0, 11);
  forwards[4] = [](const std::vector<double>&) {
    return std::vector<double>(11, 0.5);
  };
  CHECK_THROWS_AS(
      precision_vs_size_experiment({0.1}, {4, 6}, forwards,
                                   CurveSource::Unitary, 0.0, ObservableAxis::X,
                                   0.0, times, 50, 2,
                                   ParameterGrid{{AxisSpec{0.0, 0.5, 51}}}, 5),
      std::invalid_argument);
  CHECK_THROWS_AS(
      precision_vs_size_experiment({0.1}, {4}, forwards, CurveSource::Unitary,
                                   0.0, ObservableAxis::X, 0.0, times, 50, 2,
                                   ParameterGrid{{AxisSpec{0.0, 0.5, 51}}}, 5),
      std::invalid_argument);
}

TEST_CASE("exact-forward precision experiment runs end to end") {
  auto times = make_time_grid(5.0, 101);
  std::vector<int> sizes = {2, 4};
  std::map<int, ForwardModel> forwards;
  for (int n : sizes) {
    SpinChainModel base{n, 0.0, 0.0, 0.0};
    forwards[n] = cached_exact_forward(base, ObservableAxis::X, times);
  }
  PrecisionExperiment experiment = precision_vs_size_experiment(
      {0.1}, sizes, forwards, CurveSource::Unitary, 0.0, ObservableAxis::X, 0.0,
      times, 100, 3, ParameterGrid{{AxisSpec{0.0, 0.5, 201}}}, 8);
  REQUIRE(experiment.rows.size() == 2);
  REQUIRE(experiment.fits.size() == 1);
  for (const auto& row : experiment.rows) {
    CHECK(row.theta_std_mean[0] > 0.0);
    CHECK(std::abs(row.theta_est_mean[0] - 0.1) < 0.05);
  }
}
