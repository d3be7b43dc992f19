#include "qmag/metrology.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qmag {

namespace {

// Rotate `neighbor` so <center|neighbor> is real and positive; removes the
// theta-dependent global phase before differencing.
ComplexVector gauge_align(const ComplexVector& center,
                          const ComplexVector& neighbor) {
  Complex overlap = center.dot(neighbor);
  double mag = std::abs(overlap);
  if (mag < 1e-14) {
    // Orthogonal neighbor: no phase information to strip.
    return neighbor;
  }
  return neighbor * (std::conj(overlap) / mag);
}

double qfi_once(const StateFn& state_fn, const ComplexVector& center,
                double theta, double h) {
  ComplexVector plus = gauge_align(center, state_fn(theta + h));
  ComplexVector minus = gauge_align(center, state_fn(theta - h));
  ComplexVector derivative = (plus - minus) / (2.0 * h);
  const double norm_sq = derivative.squaredNorm();
  const Complex overlap = center.dot(derivative);
  return 4.0 * (norm_sq - std::norm(overlap));
}

}  // namespace

QfiResult qfi_pure(const StateFn& state_fn, double theta, double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("qfi_pure needs a positive step");
  }
  ComplexVector center = state_fn(theta);
  const double norm_err = std::abs(center.norm() - 1.0);
  if (norm_err > 1e-8) {
    throw std::invalid_argument("state_fn must return normalized states");
  }
  const double coarse = qfi_once(state_fn, center, theta, step);
  const double fine = qfi_once(state_fn, center, theta, 0.5 * step);
  const double scale = std::max({std::abs(coarse), std::abs(fine), 1e-9});
  if (std::abs(coarse - fine) > 0.01 * scale) {
    std::ostringstream msg;
    msg << "qfi finite difference at steps " << step << " and " << step / 2
        << " disagree by more than 1% (" << coarse << " vs " << fine
        << "); the step is below the noise floor, try step " << step * 10;
    throw std::runtime_error(msg.str());
  }
  QfiResult result;
  result.theta = theta;
  result.step = step;
  result.qfi = coarse;
  if (result.qfi < 0.0) {
    if (result.qfi < -1e-8) {
      throw std::runtime_error("qfi came out negative beyond tolerance");
    }
    result.qfi = 0.0;
  }
  if (result.qfi > 0.0) {
    result.bound = 1.0 / std::sqrt(result.qfi);
  }
  return result;
}

std::optional<double> cramer_rao(double qfi) {
  if (qfi < 0.0) {
    throw std::invalid_argument("qfi must be non-negative");
  }
  if (qfi == 0.0) {
    return std::nullopt;  // no information: the bound is unbounded
  }
  return 1.0 / std::sqrt(qfi);
}

StateFn chain_state_fn(const SpinChainModel& base, ObservableAxis axis,
                       double t_eval) {
  return [base, axis, t_eval](double g) {
    SpinChainModel model = base;
    if (axis == ObservableAxis::X) {
      model.g_x = g;
    } else {
      model.g_y = g;
    }
    return evolved_states(model, {t_eval}).front();
  };
}

ScalingFit fit_scaling(const std::vector<int>& sizes,
                       const std::vector<double>& precisions) {
  if (sizes.size() != precisions.size() || sizes.size() < 2) {
    throw std::invalid_argument(
        "fit_scaling needs at least two (size, precision) pairs");
  }
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 2 || !(precisions[i] > 0.0)) {
      throw std::invalid_argument(
          "fit_scaling needs sizes >= 2 and positive precisions");
    }
  }
  const std::size_t n = sizes.size();
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += std::log(static_cast<double>(sizes[i]));
    sy += std::log(precisions[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(static_cast<double>(sizes[i])) - mx;
    const double dy = std::log(precisions[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0)) {
    throw std::invalid_argument("fit_scaling needs at least two distinct sizes");
  }
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  ScalingFit fit;
  fit.sizes = sizes;
  fit.precisions = precisions;
  fit.exponent = -slope;
  fit.prefactor = std::exp(intercept);
  for (std::size_t i = 0; i < n; ++i) {
    const double predicted =
        intercept + slope * std::log(static_cast<double>(sizes[i]));
    fit.residuals.push_back(std::log(precisions[i]) - predicted);
  }
  return fit;
}

PrecisionExperiment precision_vs_size_experiment(
    const std::vector<double>& true_theta, const std::vector<int>& sizes,
    const std::map<int, ForwardModel>& forwards, CurveSource source,
    double gamma, ObservableAxis axis, double j_z,
    const std::vector<double>& times, long long n_p, int n_runs,
    const ParameterGrid& grid, std::uint64_t root_seed) {
  if (sizes.size() < 2) {
    throw std::invalid_argument(
        "precision experiment needs at least two system sizes");
  }
  for (int n : sizes) {
    if (!forwards.count(n)) {
      std::ostringstream msg;
      msg << "no forward model provided for N = " << n;
      throw std::invalid_argument(msg.str());
    }
  }
  PrecisionExperiment experiment;
  for (int n : sizes) {
    SpinChainModel base;
    base.n_sites = n;
    base.j_z = j_z;
    PrecisionRow row;
    row.n_sites = n;
    row.detail = repeated_estimation(
        base, source, gamma, axis, true_theta, times, n_p, n_runs,
        forwards.at(n), grid, RngStream(root_seed).derive("size", n).seed());
    row.theta_est_mean = row.detail.mean_theta_est;
    row.theta_std_mean = row.detail.mean_theta_std;
    experiment.rows.push_back(std::move(row));
  }
  for (int d = 0; d < grid.dims(); ++d) {
    std::vector<double> precisions;
    for (const auto& row : experiment.rows) {
      precisions.push_back(row.theta_std_mean[d]);
    }
    experiment.fits.push_back(fit_scaling(sizes, precisions));
  }
  return experiment;
}

}  // namespace qmag
