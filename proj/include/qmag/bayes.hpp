#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qmag/grid.hpp"
#include "qmag/sampling.hpp"

namespace qmag {

/// Produces the model curve (length N_T) for a candidate field vector;
/// either the exact simulator or a trained surrogate.
using ForwardModel =
    std::function<std::vector<double>(const std::vector<double>&)>;

/// Log prior density over the field box; only the flat one ships.
using LogPrior = std::function<double(const std::vector<double>&)>;

LogPrior flat_prior();

/// Discretized posterior over the parameter grid. `probabilities` are
/// densities: sum(prob) * cell_measure = 1.
struct PosteriorGrid {
  ParameterGrid grid;
  Eigen::VectorXd log_weights;
  Eigen::VectorXd probabilities;
  std::string prior_descriptor = "flat";
};

struct EstimateSummary {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<Eigen::VectorXd> marginals;  // one density per dimension
};

inline constexpr double kLikelihoodClamp = 1e-6;

/// Bernoulli-product log likelihood, binomial coefficients dropped. Curve
/// values are clamped into [eps, 1-eps] with eps = 1e-6 before the logs.
double log_likelihood(const ObservationSet& obs,
                      const std::vector<double>& curve);

/// Posterior from log weights (likelihood + prior already summed):
/// max-subtraction, exponentiation, cell-measure normalization.
PosteriorGrid posterior_from_log_weights(const ParameterGrid& grid,
                                         Eigen::VectorXd log_weights,
                                         std::string prior_descriptor);

/// Evaluates the forward model on every grid node.
PosteriorGrid posterior(const ObservationSet& obs, const ForwardModel& forward,
                        const ParameterGrid& grid,
                        const LogPrior& prior = flat_prior());

/// Marginal mean, standard deviation and density for one dimension,
/// trapezoidal quadrature, marginal renormalized to integrate to 1.
EstimateSummary marginal_estimate(const PosteriorGrid& post, int dim);

/// All dimensions at once.
EstimateSummary marginal_estimates(const PosteriorGrid& post);

struct EstimationRun {
  std::uint64_t seed = 0;
  std::vector<double> theta_est;
  std::vector<double> theta_std;
};

struct RepeatedEstimation {
  std::vector<EstimationRun> runs;
  std::vector<double> mean_theta_est;  // averaged over runs, per dimension
  std::vector<double> mean_theta_std;
};

/// Simulate -> posterior -> marginal summary, n_runs times with derived
/// seeds, then arithmetic means of the estimates and standard deviations.
RepeatedEstimation repeated_estimation(
    const SpinChainModel& base, CurveSource source, double gamma,
    ObservableAxis axis, const std::vector<double>& true_theta,
    const std::vector<double>& times, long long n_p, int n_runs,
    const ForwardModel& forward, const ParameterGrid& grid,
    std::uint64_t root_seed);

}  // namespace qmag
