#include "qmag/grid.hpp"

#include <stdexcept>

namespace qmag {

std::vector<double> AxisSpec::values() const {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = value(i);
  return out;
}

std::size_t ParameterGrid::node_count() const {
  std::size_t n = 1;
  for (const auto& axis : axes) n *= static_cast<std::size_t>(axis.count);
  return n;
}

std::vector<double> ParameterGrid::node(std::size_t flat) const {
  std::vector<double> theta(axes.size());
  for (int d = dims() - 1; d >= 0; --d) {
    std::size_t count = static_cast<std::size_t>(axes[d].count);
    theta[d] = axes[d].value(static_cast<int>(flat % count));
    flat /= count;
  }
  return theta;
}

double ParameterGrid::cell_measure() const {
  double measure = 1.0;
  for (const auto& axis : axes) measure *= axis.spacing();
  return measure;
}

void ParameterGrid::validate(int min_points) const {
  if (axes.empty()) {
    throw std::invalid_argument("parameter grid has no axes");
  }
  for (const auto& axis : axes) {
    if (axis.count < min_points) {
      throw std::invalid_argument("parameter grid axis has too few points");
    }
    if (axis.count > 1 && !(axis.max > axis.min)) {
      throw std::invalid_argument("parameter grid axis must be increasing");
    }
  }
}

ParameterGrid default_grid_1d() { return {{AxisSpec{0.0, 0.5, 501}}}; }

ParameterGrid default_grid_2d() {
  return {{AxisSpec{0.0, 0.5, 101}, AxisSpec{0.0, 0.5, 101}}};
}

ParameterGrid calibration_grid_1d() { return {{AxisSpec{0.0, 0.5, 51}}}; }

ParameterGrid calibration_grid_2d() {
  return {{AxisSpec{0.0, 0.5, 51}, AxisSpec{0.0, 0.5, 51}}};
}

}  // namespace qmag
