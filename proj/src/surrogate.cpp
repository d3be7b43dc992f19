#include "qmag/surrogate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace qmag {

namespace {

Eigen::VectorXd normalize_input(const SurrogateModel& model,
                                const Eigen::VectorXd& theta) {
  if (theta.size() != model.input_dims()) {
    throw std::invalid_argument("surrogate input dimension mismatch");
  }
  return (theta - model.input_center).cwiseQuotient(model.input_halfwidth);
}

// Activations per layer for a batch; index 0 is the normalized input.
std::vector<Eigen::MatrixXd> forward_pass(const SurrogateModel& model,
                                          const Eigen::MatrixXd& normalized) {
  std::vector<Eigen::MatrixXd> activations;
  activations.reserve(model.weights.size() + 1);
  activations.push_back(normalized);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    Eigen::MatrixXd z =
        (model.weights[l] * activations.back()).colwise() + model.biases[l];
    if (l + 1 < model.weights.size()) {
      activations.push_back(z.array().tanh().matrix());
    } else {
      activations.push_back(std::move(z));  // affine output layer
    }
  }
  return activations;
}

Eigen::MatrixXd normalize_batch(const SurrogateModel& model,
                                const Eigen::MatrixXd& thetas) {
  if (thetas.rows() != model.input_dims()) {
    throw std::invalid_argument("surrogate input dimension mismatch");
  }
  return (thetas.colwise() - model.input_center).array().colwise() /
         model.input_halfwidth.array();
}

void check_architecture(const SurrogateModel& model) {
  if (model.layer_sizes.size() < 2) {
    throw std::invalid_argument("surrogate needs at least input and output");
  }
  if (model.weights.size() != model.layer_sizes.size() - 1 ||
      model.biases.size() != model.weights.size()) {
    throw std::invalid_argument("surrogate parameter count mismatch");
  }
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    if (model.weights[l].rows() != model.layer_sizes[l + 1] ||
        model.weights[l].cols() != model.layer_sizes[l] ||
        model.biases[l].size() != model.layer_sizes[l + 1]) {
      throw std::invalid_argument("surrogate layer shape mismatch");
    }
  }
}

}  // namespace

double ParameterGradients::norm() const {
  double sum = 0.0;
  for (const auto& w : weights) sum += w.squaredNorm();
  for (const auto& b : biases) sum += b.squaredNorm();
  return std::sqrt(sum);
}

Eigen::VectorXd forward(const SurrogateModel& model,
                        const Eigen::VectorXd& theta) {
  Eigen::VectorXd a = normalize_input(model, theta);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    Eigen::VectorXd z = model.weights[l] * a + model.biases[l];
    a = (l + 1 < model.weights.size()) ? z.array().tanh().matrix() : z;
  }
  return a;
}

std::vector<double> forward_curve(const SurrogateModel& model,
                                  const std::vector<double>& theta) {
  Eigen::VectorXd input =
      Eigen::Map<const Eigen::VectorXd>(theta.data(), theta.size());
  Eigen::VectorXd out = forward(model, input);
  return std::vector<double>(out.data(), out.data() + out.size());
}

Eigen::MatrixXd forward_batch(const SurrogateModel& model,
                              const Eigen::MatrixXd& thetas) {
  auto activations = forward_pass(model, normalize_batch(model, thetas));
  return activations.back();
}

double dataset_cost(const SurrogateModel& model, const Eigen::MatrixXd& inputs,
                    const Eigen::MatrixXd& targets) {
  Eigen::MatrixXd outputs = forward_batch(model, inputs);
  return (outputs - targets).squaredNorm() /
         static_cast<double>(targets.size());
}

std::pair<double, ParameterGradients> cost_and_gradients(
    const SurrogateModel& model, const Eigen::MatrixXd& inputs,
    const Eigen::MatrixXd& targets) {
  check_architecture(model);
  const auto activations = forward_pass(model, normalize_batch(model, inputs));
  const Eigen::MatrixXd& outputs = activations.back();
  const double scale = 1.0 / static_cast<double>(targets.size());
  const double cost = (outputs - targets).squaredNorm() * scale;

  ParameterGradients grads;
  grads.weights.resize(model.weights.size());
  grads.biases.resize(model.biases.size());

  // delta = dC/dz at the output (affine output layer).
  Eigen::MatrixXd delta = 2.0 * scale * (outputs - targets);
  for (int l = static_cast<int>(model.weights.size()) - 1; l >= 0; --l) {
    grads.weights[l] = delta * activations[l].transpose();
    grads.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (model.weights[l].transpose() * delta)
                  .cwiseProduct((1.0 - activations[l].array().square()).matrix());
    }
  }
  return {cost, std::move(grads)};
}

Eigen::MatrixXd input_jacobian(const SurrogateModel& model,
                               const Eigen::VectorXd& theta) {
  check_architecture(model);
  Eigen::VectorXd a = normalize_input(model, theta);
  std::vector<Eigen::VectorXd> activations{a};
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    Eigen::VectorXd z = model.weights[l] * activations.back() + model.biases[l];
    activations.push_back(
        l + 1 < model.weights.size() ? z.array().tanh().matrix() : z);
  }
  Eigen::MatrixXd jac = model.weights.back();
  for (int l = static_cast<int>(model.weights.size()) - 2; l >= 0; --l) {
    Eigen::VectorXd deriv =
        (1.0 - activations[l + 1].array().square()).matrix();
    jac = jac * deriv.asDiagonal() * model.weights[l];
  }
  return jac * model.input_halfwidth.cwiseInverse().asDiagonal();
}

std::array<std::size_t, 3> split_sizes(std::size_t n, double train_fraction,
                                       double val_fraction) {
  if (train_fraction <= 0.0 || val_fraction < 0.0 ||
      train_fraction + val_fraction > 1.0 + 1e-12) {
    throw std::invalid_argument("split fractions must be positive and sum <= 1");
  }
  auto n_train = static_cast<std::size_t>(std::floor(train_fraction * n));
  auto n_val = static_cast<std::size_t>(std::floor(val_fraction * n));
  return {n_train, n_val, n - n_train - n_val};
}

SurrogateModel init_model(const std::vector<int>& layer_sizes,
                          const Eigen::VectorXd& input_center,
                          const Eigen::VectorXd& input_halfwidth,
                          RngStream& rng) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("architecture needs at least two layers");
  }
  SurrogateModel model;
  model.layer_sizes = layer_sizes;
  model.input_center = input_center;
  model.input_halfwidth = input_halfwidth;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const int fan_in = layer_sizes[l];
    const int fan_out = layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) {
        w(r, c) = rng.next_uniform(-limit, limit);
      }
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return model;
}

std::pair<SurrogateModel, TrainingMetrics> train(
    const CalibrationDataset& dataset, const TrainingConfig& config,
    RngStream& rng) {
  const std::size_t n = dataset.examples.size();
  if (n == 0) {
    throw std::invalid_argument("training dataset is empty");
  }
  const int in_dims = dataset.input_dims();
  const int out_dims = static_cast<int>(dataset.examples.front().target.size());
  for (const auto& example : dataset.examples) {
    for (double d : example.target) {
      if (!(d >= 0.0 && d <= 1.0)) {
        throw std::invalid_argument("calibration targets must lie in [0,1]");
      }
    }
  }

  Eigen::MatrixXd inputs(in_dims, n);
  Eigen::MatrixXd targets(out_dims, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& example = dataset.examples[i];
    for (int d = 0; d < in_dims; ++d) inputs(d, i) = example.theta[d];
    for (int j = 0; j < out_dims; ++j) targets(j, i) = example.target[j];
  }

  auto sizes = split_sizes(n, config.train_fraction, config.val_fraction);
  if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0) {
    throw std::invalid_argument(
        "dataset too small: a split partition came out empty");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream split_stream =
      RngStream(config.split_seed).derive("train-val-test-split", 0);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = split_stream.next_u64() % (i + 1);
    std::swap(order[i], order[j]);
  }
  auto gather = [&](std::size_t offset, std::size_t count) {
    Eigen::MatrixXd x(in_dims, count), t(out_dims, count);
    for (std::size_t i = 0; i < count; ++i) {
      x.col(i) = inputs.col(order[offset + i]);
      t.col(i) = targets.col(order[offset + i]);
    }
    return std::make_pair(std::move(x), std::move(t));
  };
  auto [train_x, train_t] = gather(0, sizes[0]);
  auto [val_x, val_t] = gather(sizes[0], sizes[1]);
  auto [test_x, test_t] = gather(sizes[0] + sizes[1], sizes[2]);

  // Normalization box comes from the scan grid, not the realized examples.
  Eigen::VectorXd center(in_dims), halfwidth(in_dims);
  for (int d = 0; d < in_dims; ++d) {
    const AxisSpec& axis = dataset.grid.axes[d];
    center(d) = 0.5 * (axis.min + axis.max);
    double half = 0.5 * (axis.max - axis.min);
    halfwidth(d) = half > 0.0 ? half : 1.0;
  }

  std::vector<int> layer_sizes;
  layer_sizes.push_back(in_dims);
  layer_sizes.insert(layer_sizes.end(), config.hidden_sizes.begin(),
                     config.hidden_sizes.end());
  layer_sizes.push_back(out_dims);
  SurrogateModel model = init_model(layer_sizes, center, halfwidth, rng);

  // Adam state.
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
  for (const auto& w : model.weights) {
    m_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    v_w.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : model.biases) {
    m_b.push_back(Eigen::VectorXd::Zero(b.size()));
    v_b.push_back(Eigen::VectorXd::Zero(b.size()));
  }

  TrainingMetrics metrics;
  SurrogateModel best_model = model;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  double lr = config.learning_rate;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    auto [cost, grads] = cost_and_gradients(model, train_x, train_t);
    if (!std::isfinite(cost)) {
      std::ostringstream msg;
      msg << "training diverged at epoch " << epoch << " (cost " << cost
          << ", lr " << lr << ")";
      throw std::runtime_error(msg.str());
    }
    double val_cost = dataset_cost(model, val_x, val_t);
    metrics.train_cost.push_back(cost);
    metrics.val_cost.push_back(val_cost);
    metrics.grad_norm.push_back(grads.norm());

    if (val_cost < best_val) {
      best_val = val_cost;
      best_model = model;
      best_epoch = epoch;
      metrics.checkpoint_epochs.push_back(epoch);
      metrics.checkpoint_val_costs.push_back(val_cost);
    }
    if (cost < config.target_cost) break;
    if (epoch - best_epoch >= config.patience) break;

    const double t = static_cast<double>(epoch);
    const double bias1 = 1.0 - std::pow(config.beta1, t);
    const double bias2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
      m_w[l] = config.beta1 * m_w[l] + (1.0 - config.beta1) * grads.weights[l];
      v_w[l] = config.beta2 * v_w[l] +
               (1.0 - config.beta2) * grads.weights[l].array().square().matrix();
      model.weights[l].array() -=
          lr * (m_w[l].array() / bias1) /
          ((v_w[l].array() / bias2).sqrt() + config.epsilon);
      m_b[l] = config.beta1 * m_b[l] + (1.0 - config.beta1) * grads.biases[l];
      v_b[l] = config.beta2 * v_b[l] +
               (1.0 - config.beta2) * grads.biases[l].array().square().matrix();
      model.biases[l].array() -=
          lr * (m_b[l].array() / bias1) /
          ((v_b[l].array() / bias2).sqrt() + config.epsilon);
    }
    lr *= config.lr_decay;
  }

  metrics.best_epoch = best_epoch;
  metrics.best_val_cost = best_val;
  metrics.final_train_cost = dataset_cost(best_model, train_x, train_t);
  metrics.final_test_cost = dataset_cost(best_model, test_x, test_t);
  return {std::move(best_model), std::move(metrics)};
}

Regression regression_metrics(const std::vector<double>& outputs,
                              const std::vector<double>& targets) {
  if (outputs.size() != targets.size() || outputs.empty()) {
    throw std::invalid_argument("regression needs matching non-empty samples");
  }
  const double n = static_cast<double>(outputs.size());
  double mean_y = std::accumulate(outputs.begin(), outputs.end(), 0.0) / n;
  double mean_t = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  double s_tt = 0.0, s_ty = 0.0, s_yy = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const double dt = targets[i] - mean_t;
    const double dy = outputs[i] - mean_y;
    s_tt += dt * dt;
    s_ty += dt * dy;
    s_yy += dy * dy;
  }
  Regression reg;
  if (s_tt <= 0.0) {
    reg.degenerate = true;
    return reg;
  }
  reg.slope = s_ty / s_tt;
  reg.intercept = mean_y - reg.slope * mean_t;
  reg.r = s_yy > 0.0 ? s_ty / std::sqrt(s_tt * s_yy) : 0.0;
  return reg;
}

Regression evaluate_regression(
    const SurrogateModel& model, const std::vector<CalibrationExample>& examples,
    const std::vector<std::vector<double>>& ideal_targets) {
  if (examples.size() != ideal_targets.size() || examples.empty()) {
    throw std::invalid_argument(
        "evaluate_regression needs one ideal target per example");
  }
  std::vector<double> outputs, targets;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    std::vector<double> y = forward_curve(model, examples[i].theta);
    if (y.size() != ideal_targets[i].size()) {
      throw std::invalid_argument("ideal target length mismatch");
    }
    outputs.insert(outputs.end(), y.begin(), y.end());
    targets.insert(targets.end(), ideal_targets[i].begin(),
                   ideal_targets[i].end());
  }
  return regression_metrics(outputs, targets);
}

}  // namespace qmag
