#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qmag/grid.hpp"
#include "qmag/rng.hpp"
#include "qmag/spin_chain.hpp"

namespace qmag {

/// Shot counter for one time instant: `successes` out of `trials` projective
/// measurements.
struct ShotRecord {
  int time_index = 0;
  long long successes = 0;
  long long trials = 0;
};

/// Simulated experimental acquisition: one ShotRecord per time instant, all
/// with the same trial count.
struct ObservationSet {
  std::vector<double> times;
  std::vector<ShotRecord> records;
  long long trials_per_instant = 0;
  std::vector<double> true_field;  // provenance for synthetic runs
  std::uint64_t seed = 0;
};

enum class CurveSource { Unitary, Lindblad };

struct CalibrationExample {
  std::vector<double> theta;
  std::vector<double> target;
  std::uint64_t sub_seed = 0;
};

/// (field, shot-averaged curve) pairs over a scan grid. With n_m absent the
/// targets are the exact expectation values (the noise-free variant); with
/// n_m = N the targets are averages of N Bernoulli draws per instant, so
/// every entry is a multiple of 1/N.
struct CalibrationDataset {
  std::vector<CalibrationExample> examples;
  ParameterGrid grid;
  std::vector<double> times;
  std::optional<long long> n_m;
  int repetitions = 1;
  std::uint64_t seed = 0;
  CurveSource source = CurveSource::Unitary;
  double gamma = 0.0;
  ObservableAxis axis = ObservableAxis::X;
  int n_sites = 0;
  double j_z = 0.0;

  int input_dims() const { return grid.dims(); }
};

/// One binomial draw realized as n_m independent Bernoulli trials.
long long sample_shots(double p, long long n_m, RngStream& rng);

/// Exact curve for the given field vector (1D: {g_x}, 2D: {g_x, g_y}),
/// unitary or Lindblad depending on source.
ObservableCurve exact_curve(const SpinChainModel& base, CurveSource source,
                            double gamma, ObservableAxis axis,
                            const std::vector<double>& theta,
                            const std::vector<double>& times);

/// Scans the grid: `repetitions` examples per grid point, each re-drawing
/// shots from the deterministic exact curve with a derived per-example
/// stream, so the dataset is a pure function of (inputs, seed) regardless of
/// generation order.
CalibrationDataset build_calibration_dataset(
    const SpinChainModel& base, CurveSource source, double gamma,
    ObservableAxis axis, const ParameterGrid& grid,
    const std::vector<double>& times, std::optional<long long> n_m,
    int repetitions, std::uint64_t seed);

/// Synthetic acquisition at the true field: n_p shots per instant drawn from
/// the exact curve.
ObservationSet simulate_observations(const SpinChainModel& base,
                                     CurveSource source, double gamma,
                                     ObservableAxis axis,
                                     const std::vector<double>& true_field,
                                     const std::vector<double>& times,
                                     long long n_p, std::uint64_t seed);

}  // namespace qmag
