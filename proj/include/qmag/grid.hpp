#pragma once

#include <cstddef>
#include <vector>

namespace qmag {

/// Uniform axis of `count` values from min to max inclusive.
struct AxisSpec {
  double min = 0.0;
  double max = 0.5;
  int count = 2;

  double spacing() const { return count > 1 ? (max - min) / (count - 1) : 0.0; }
  double value(int i) const { return count > 1 ? min + spacing() * i : min; }
  std::vector<double> values() const;
};

/// Rectangular grid over one or two field parameters, row-major flattening
/// (last axis fastest).
struct ParameterGrid {
  std::vector<AxisSpec> axes;

  int dims() const { return static_cast<int>(axes.size()); }
  std::size_t node_count() const;
  std::vector<double> node(std::size_t flat) const;
  /// Product of axis spacings; the cell measure used to normalize grid
  /// probability densities.
  double cell_measure() const;

  /// Throws unless every axis is strictly increasing with at least
  /// `min_points` values.
  void validate(int min_points = 1) const;
};

/// 1D default: [0, 0.5] with 501 points.
ParameterGrid default_grid_1d();
/// 2D default: [0, 0.5]^2 with 101x101 points.
ParameterGrid default_grid_2d();
/// Calibration defaults: 51 values per axis, per the 0.01-spaced scan.
ParameterGrid calibration_grid_1d();
ParameterGrid calibration_grid_2d();

}  // namespace qmag
