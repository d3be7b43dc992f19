#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "qmag/rng.hpp"
#include "qmag/sampling.hpp"

namespace qmag {

/// Fully connected tanh network mapping field parameters to the observable
/// curve: layer sizes [M, 6, 12, 25, 50, N_T] by default, affine output,
/// inputs normalized from the calibration box onto [-1, 1].
struct SurrogateModel {
  std::vector<int> layer_sizes;
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is (out x in)
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd input_center;
  Eigen::VectorXd input_halfwidth;

  int input_dims() const { return layer_sizes.front(); }
  int output_dims() const { return layer_sizes.back(); }
};

struct TrainingConfig {
  std::vector<int> hidden_sizes = {6, 12, 25, 50};
  int max_epochs = 20000;
  double target_cost = 1e-5;
  double learning_rate = 1e-2;
  double lr_decay = 1.0;  // per-epoch multiplicative schedule
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double train_fraction = 0.70;
  double val_fraction = 0.15;
  std::uint64_t split_seed = 1;
  int patience = 3000;  // epochs without validation improvement
};

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
  bool degenerate = false;  // constant targets: R undefined
};

struct TrainingMetrics {
  std::vector<double> train_cost;  // per epoch, before the update
  std::vector<double> val_cost;
  std::vector<double> grad_norm;
  std::vector<int> checkpoint_epochs;       // epochs where validation improved
  std::vector<double> checkpoint_val_costs;
  int best_epoch = 0;
  double best_val_cost = 0.0;
  double final_train_cost = 0.0;
  double final_test_cost = 0.0;
  std::optional<Regression> test_regression;
};

/// Mirrors the weight/bias layout; holds dC/dparam.
struct ParameterGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  double norm() const;
};

Eigen::VectorXd forward(const SurrogateModel& model,
                        const Eigen::VectorXd& theta);
std::vector<double> forward_curve(const SurrogateModel& model,
                                  const std::vector<double>& theta);
/// Columns of `thetas` are inputs; returns one output column per input.
Eigen::MatrixXd forward_batch(const SurrogateModel& model,
                              const Eigen::MatrixXd& thetas);

/// Mean squared error over all examples and outputs (targets as columns).
double dataset_cost(const SurrogateModel& model, const Eigen::MatrixXd& inputs,
                    const Eigen::MatrixXd& targets);

/// Cost plus analytic full-batch gradients via backpropagation.
std::pair<double, ParameterGradients> cost_and_gradients(
    const SurrogateModel& model, const Eigen::MatrixXd& inputs,
    const Eigen::MatrixXd& targets);

/// d output_j / d theta_k as an (outputs x inputs) matrix, including the
/// input-normalization chain factor.
Eigen::MatrixXd input_jacobian(const SurrogateModel& model,
                               const Eigen::VectorXd& theta);

/// Floor train, floor validation, remainder test.
std::array<std::size_t, 3> split_sizes(std::size_t n, double train_fraction,
                                       double val_fraction);

/// Seeded Glorot-uniform initialization for the given architecture.
SurrogateModel init_model(const std::vector<int>& layer_sizes,
                          const Eigen::VectorXd& input_center,
                          const Eigen::VectorXd& input_halfwidth,
                          RngStream& rng);

/// Full-batch Adam minimization of the MSE cost with validation-based
/// checkpointing. Stops at target cost, patience exhaustion or the epoch
/// cap; returns the parameters with the best validation cost.
std::pair<SurrogateModel, TrainingMetrics> train(
    const CalibrationDataset& dataset, const TrainingConfig& config,
    RngStream& rng);

/// Pooled least-squares fit and Pearson correlation of predictions against
/// targets.
Regression regression_metrics(const std::vector<double>& outputs,
                              const std::vector<double>& targets);

/// Regression of the model's outputs at the example inputs against ideal
/// (exact-curve) targets.
Regression evaluate_regression(
    const SurrogateModel& model, const std::vector<CalibrationExample>& examples,
    const std::vector<std::vector<double>>& ideal_targets);

}  // namespace qmag
