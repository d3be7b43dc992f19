#include "qmag/sampling.hpp"

#include <cstdio>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace qmag {

namespace {

// The simulators are deterministic, so identical (model, source, axis,
// gamma, theta, times) requests always produce the same curve; repeated
// estimation hits the same truth curve once per run. Memoize by exact key.
std::string curve_key(const SpinChainModel& model, CurveSource source,
                      double gamma, ObservableAxis axis,
                      const std::vector<double>& times) {
  std::string key;
  key.reserve(64 + times.size() * sizeof(double));
  char head[128];
  std::snprintf(head, sizeof(head), "%d|%.17g|%.17g|%.17g|%d|%d|%.17g|",
                model.n_sites, model.j_z, model.g_x, model.g_y,
                static_cast<int>(source), static_cast<int>(axis), gamma);
  key += head;
  key.append(reinterpret_cast<const char*>(times.data()),
             times.size() * sizeof(double));
  return key;
}

}  // namespace

long long sample_shots(double p, long long n_m, RngStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) {
    std::ostringstream msg;
    msg << "success probability " << p
        << " outside [0,1]; upstream curve was not clamped";
    throw std::invalid_argument(msg.str());
  }
  if (n_m < 1) {
    throw std::invalid_argument("sample_shots needs n_m >= 1");
  }
  long long successes = 0;
  for (long long m = 0; m < n_m; ++m) {
    if (rng.bernoulli(p)) ++successes;
  }
  return successes;
}

ObservableCurve exact_curve(const SpinChainModel& base, CurveSource source,
                            double gamma, ObservableAxis axis,
                            const std::vector<double>& theta,
                            const std::vector<double>& times) {
  SpinChainModel model = base;
  if (theta.empty() || theta.size() > 2) {
    throw std::invalid_argument("field vector must have 1 or 2 components");
  }
  model.g_x = theta[0];
  model.g_y = theta.size() > 1 ? theta[1] : 0.0;

  static std::mutex mutex;
  static std::map<std::string, std::vector<double>> cache;
  const std::string key = curve_key(model, source, gamma, axis, times);
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return ObservableCurve{times, it->second};
  }
  ObservableCurve curve = source == CurveSource::Lindblad
                              ? evolve_lindblad(model, gamma, axis, times)
                              : evolve_expectation(model, axis, times);
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(key, curve.values);
  return curve;
}

CalibrationDataset build_calibration_dataset(
    const SpinChainModel& base, CurveSource source, double gamma,
    ObservableAxis axis, const ParameterGrid& grid,
    const std::vector<double>& times, std::optional<long long> n_m,
    int repetitions, std::uint64_t seed) {
  grid.validate(1);
  if (repetitions < 1) {
    throw std::invalid_argument("repetitions must be >= 1");
  }
  if (n_m && *n_m < 1) {
    throw std::invalid_argument("n_m must be >= 1 when shot noise is on");
  }

  CalibrationDataset dataset;
  dataset.grid = grid;
  dataset.times = times;
  dataset.n_m = n_m;
  dataset.repetitions = repetitions;
  dataset.seed = seed;
  dataset.source = source;
  dataset.gamma = gamma;
  dataset.axis = axis;
  dataset.n_sites = base.n_sites;
  dataset.j_z = base.j_z;

  RngStream root(seed);
  const std::size_t points = grid.node_count();
  dataset.examples.reserve(points * repetitions);
  for (std::size_t g = 0; g < points; ++g) {
    const std::vector<double> theta = grid.node(g);
    const ObservableCurve curve =
        exact_curve(base, source, gamma, axis, theta, times);
    for (int r = 0; r < repetitions; ++r) {
      CalibrationExample example;
      example.theta = theta;
      example.sub_seed =
          root.derive("calibration", g * repetitions + r).seed();
      if (n_m) {
        RngStream stream(example.sub_seed);
        example.target.reserve(curve.values.size());
        for (double p : curve.values) {
          example.target.push_back(
              static_cast<double>(sample_shots(p, *n_m, stream)) /
              static_cast<double>(*n_m));
        }
      } else {
        example.target = curve.values;
      }
      dataset.examples.push_back(std::move(example));
    }
  }
  return dataset;
}

ObservationSet simulate_observations(const SpinChainModel& base,
                                     CurveSource source, double gamma,
                                     ObservableAxis axis,
                                     const std::vector<double>& true_field,
                                     const std::vector<double>& times,
                                     long long n_p, std::uint64_t seed) {
  if (n_p < 0) {
    throw std::invalid_argument("n_p must be >= 0");
  }
  const ObservableCurve curve =
      exact_curve(base, source, gamma, axis, true_field, times);
  ObservationSet obs;
  obs.times = times;
  obs.trials_per_instant = n_p;
  obs.true_field = true_field;
  obs.seed = seed;
  obs.records.reserve(times.size());
  RngStream stream = RngStream(seed).derive("observations", 0);
  for (std::size_t j = 0; j < curve.values.size(); ++j) {
    ShotRecord record;
    record.time_index = static_cast<int>(j);
    record.trials = n_p;
    record.successes = n_p > 0 ? sample_shots(curve.values[j], n_p, stream) : 0;
    obs.records.push_back(record);
  }
  return obs;
}

}  // namespace qmag
