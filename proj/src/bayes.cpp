#include "qmag/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qmag {

namespace {

// Trapezoidal quadrature weights on a uniform axis: h/2 at the ends.
Eigen::VectorXd trapezoid_weights(const AxisSpec& axis) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(axis.count, axis.spacing());
  w(0) *= 0.5;
  w(axis.count - 1) *= 0.5;
  return w;
}

}  // namespace

LogPrior flat_prior() {
  return [](const std::vector<double>&) { return 0.0; };
}

double log_likelihood(const ObservationSet& obs,
                      const std::vector<double>& curve) {
  if (obs.records.size() != curve.size()) {
    throw std::invalid_argument(
        "observation set and curve have different lengths");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < curve.size(); ++j) {
    const ShotRecord& record = obs.records[j];
    if (record.successes < 0 || record.successes > record.trials) {
      throw std::invalid_argument("shot record has successes outside [0, trials]");
    }
    const double p =
        std::clamp(curve[j], kLikelihoodClamp, 1.0 - kLikelihoodClamp);
    const double x = static_cast<double>(record.successes);
    const double miss = static_cast<double>(record.trials - record.successes);
    if (x > 0.0) total += x * std::log(p);
    if (miss > 0.0) total += miss * std::log1p(-p);
  }
  return total;
}

PosteriorGrid posterior_from_log_weights(const ParameterGrid& grid,
                                         Eigen::VectorXd log_weights,
                                         std::string prior_descriptor) {
  grid.validate(2);
  const auto nodes = static_cast<Eigen::Index>(grid.node_count());
  if (log_weights.size() != nodes) {
    throw std::invalid_argument("log weight count does not match the grid");
  }
  const double peak = log_weights.maxCoeff();
  if (!std::isfinite(peak)) {
    throw std::runtime_error(
        "posterior is degenerate: no grid node has finite weight");
  }
  PosteriorGrid post;
  post.grid = grid;
  post.log_weights = log_weights.array() - peak;
  Eigen::VectorXd unnormalized = post.log_weights.array().exp();
  const double mass = unnormalized.sum() * grid.cell_measure();
  post.probabilities = unnormalized / mass;
  post.prior_descriptor = std::move(prior_descriptor);
  return post;
}

PosteriorGrid posterior(const ObservationSet& obs, const ForwardModel& forward,
                        const ParameterGrid& grid, const LogPrior& prior) {
  grid.validate(2);
  const std::size_t nodes = grid.node_count();
  Eigen::VectorXd log_weights(static_cast<Eigen::Index>(nodes));
  for (std::size_t i = 0; i < nodes; ++i) {
    const std::vector<double> theta = grid.node(i);
    log_weights(static_cast<Eigen::Index>(i)) =
        log_likelihood(obs, forward(theta)) + prior(theta);
  }
  return posterior_from_log_weights(grid, std::move(log_weights), "flat");
}

EstimateSummary marginal_estimate(const PosteriorGrid& post, int dim) {
  const int dims = post.grid.dims();
  if (dim < 0 || dim >= dims) {
    throw std::invalid_argument("marginal dimension out of range");
  }
  const AxisSpec& axis = post.grid.axes[dim];
  Eigen::VectorXd marginal = Eigen::VectorXd::Zero(axis.count);

  if (dims == 1) {
    marginal = post.probabilities;
  } else {
    // Integrate the other dimensions out with trapezoid weights.
    for (std::size_t flat = 0; flat < post.grid.node_count(); ++flat) {
      std::size_t rest = flat;
      int my_index = 0;
      double weight = 1.0;
      for (int d = dims - 1; d >= 0; --d) {
        const auto count = static_cast<std::size_t>(post.grid.axes[d].count);
        const int idx = static_cast<int>(rest % count);
        rest /= count;
        if (d == dim) {
          my_index = idx;
        } else {
          const AxisSpec& other = post.grid.axes[d];
          double w = other.spacing();
          if (idx == 0 || idx == other.count - 1) w *= 0.5;
          weight *= w;
        }
      }
      marginal(my_index) +=
          weight * post.probabilities(static_cast<Eigen::Index>(flat));
    }
  }

  const Eigen::VectorXd quad = trapezoid_weights(axis);
  const double mass = quad.dot(marginal);
  if (!(mass > 0.0)) {
    throw std::runtime_error("marginal has no mass");
  }
  marginal /= mass;

  double mean = 0.0;
  for (int i = 0; i < axis.count; ++i) {
    mean += quad(i) * axis.value(i) * marginal(i);
  }
  double variance = 0.0;
  for (int i = 0; i < axis.count; ++i) {
    const double d = axis.value(i) - mean;
    variance += quad(i) * d * d * marginal(i);
  }

  EstimateSummary summary;
  summary.mean.push_back(mean);
  summary.stddev.push_back(std::sqrt(std::max(variance, 0.0)));
  summary.marginals.push_back(std::move(marginal));
  return summary;
}

EstimateSummary marginal_estimates(const PosteriorGrid& post) {
  EstimateSummary all;
  for (int d = 0; d < post.grid.dims(); ++d) {
    EstimateSummary one = marginal_estimate(post, d);
    all.mean.push_back(one.mean[0]);
    all.stddev.push_back(one.stddev[0]);
    all.marginals.push_back(std::move(one.marginals[0]));
  }
  return all;
}

RepeatedEstimation repeated_estimation(
    const SpinChainModel& base, CurveSource source, double gamma,
    ObservableAxis axis, const std::vector<double>& true_theta,
    const std::vector<double>& times, long long n_p, int n_runs,
    const ForwardModel& forward, const ParameterGrid& grid,
    std::uint64_t root_seed) {
  if (n_runs < 1) {
    throw std::invalid_argument("repeated_estimation needs n_runs >= 1");
  }
  RepeatedEstimation result;
  const int dims = grid.dims();
  result.mean_theta_est.assign(dims, 0.0);
  result.mean_theta_std.assign(dims, 0.0);
  RngStream root(root_seed);
  for (int r = 0; r < n_runs; ++r) {
    const std::uint64_t run_seed = root.derive("estimation-run", r).seed();
    ObservationSet obs = simulate_observations(base, source, gamma, axis,
                                               true_theta, times, n_p, run_seed);
    PosteriorGrid post = posterior(obs, forward, grid);
    EstimateSummary summary = marginal_estimates(post);
    EstimationRun run;
    run.seed = run_seed;
    run.theta_est = summary.mean;
    run.theta_std = summary.stddev;
    for (int d = 0; d < dims; ++d) {
      result.mean_theta_est[d] += summary.mean[d] / n_runs;
      result.mean_theta_std[d] += summary.stddev[d] / n_runs;
    }
    result.runs.push_back(std::move(run));
  }
  return result;
}

}  // namespace qmag
