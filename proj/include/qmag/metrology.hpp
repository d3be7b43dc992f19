#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "qmag/bayes.hpp"
#include "qmag/spin_chain.hpp"

namespace qmag {

/// Parameter-to-state map, e.g. the evolved chain state at the final
/// protocol time as a function of the field strength.
using StateFn = std::function<ComplexVector(double)>;

struct QfiResult {
  double theta = 0.0;
  double qfi = 0.0;
  double step = 0.0;
  std::optional<double> bound;  // 1/sqrt(qfi); absent when qfi == 0
};

/// Quantum Fisher information of a pure-state family by central differences
/// with gauge alignment: neighbor states are rotated so their overlap with
/// the central state is real and positive before differencing. A half-step
/// consistency check (>1% disagreement) reports an unusable step.
QfiResult qfi_pure(const StateFn& state_fn, double theta, double step = 1e-5);

/// Cramer-Rao precision bound 1/sqrt(qfi); nullopt flags the unbounded
/// qfi == 0 case.
std::optional<double> cramer_rao(double qfi);

/// Convenience StateFn for the chain protocol: g -> evolved state at t_eval
/// (g enters on the chosen axis).
StateFn chain_state_fn(const SpinChainModel& base, ObservableAxis axis,
                       double t_eval = 5.0);

struct ScalingFit {
  std::vector<int> sizes;
  std::vector<double> precisions;
  double exponent = 0.0;   // alpha in precision ~ N^(-alpha)
  double prefactor = 0.0;  // c in precision = c * N^(-alpha)
  std::vector<double> residuals;  // per point, in log space
};

/// Least squares of ln(precision) on ln(N); exponent = -slope.
ScalingFit fit_scaling(const std::vector<int>& sizes,
                       const std::vector<double>& precisions);

struct PrecisionRow {
  int n_sites = 0;
  std::vector<double> theta_est_mean;
  std::vector<double> theta_std_mean;
  RepeatedEstimation detail;
};

struct PrecisionExperiment {
  std::vector<PrecisionRow> rows;
  std::vector<ScalingFit> fits;  // one per estimated dimension
};

/// Repeated estimation per system size followed by a log-log scaling fit of
/// the averaged standard deviation. `forwards` must provide a curve model
/// for every requested size.
PrecisionExperiment precision_vs_size_experiment(
    const std::vector<double>& true_theta, const std::vector<int>& sizes,
    const std::map<int, ForwardModel>& forwards, CurveSource source,
    double gamma, ObservableAxis axis, double j_z,
    const std::vector<double>& times, long long n_p, int n_runs,
    const ParameterGrid& grid, std::uint64_t root_seed);

}  // namespace qmag
