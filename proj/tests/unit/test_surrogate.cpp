#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qmag/io.hpp"
#include "qmag/surrogate.hpp"

using namespace qmag;

namespace {

SurrogateModel small_net(std::uint64_t seed,
                         std::vector<int> layer_sizes = {2, 3, 4}) {
  RngStream rng(seed);
  Eigen::VectorXd center = Eigen::VectorXd::Constant(layer_sizes.front(), 0.25);
  Eigen::VectorXd halfwidth =
      Eigen::VectorXd::Constant(layer_sizes.front(), 0.25);
  return init_model(layer_sizes, center, halfwidth, rng);
}

CalibrationDataset constant_dataset(double value, int n_points, int n_t) {
  CalibrationDataset dataset;
  dataset.grid = ParameterGrid{{AxisSpec{0.0, 0.5, n_points}}};
  dataset.times = make_time_grid(5.0, n_t);
  dataset.repetitions = 1;
  dataset.seed = 1;
  for (int i = 0; i < n_points; ++i) {
    CalibrationExample example;
    example.theta = {dataset.grid.axes[0].value(i)};
    example.target.assign(n_t, value);
    dataset.examples.push_back(example);
  }
  return dataset;
}

bool gradients_close(double analytic, double numeric) {
  return std::abs(analytic - numeric) <=
         1e-6 * std::max(std::abs(analytic), std::abs(numeric)) + 1e-9;
}

}  // namespace

TEST_CASE("zero weights reduce the network to its output bias") {
  SurrogateModel model = small_net(5, {1, 6, 12, 25, 50, 101});
  for (auto& w : model.weights) w.setZero();
  for (auto& b : model.biases) b.setZero();
  model.biases.back() = Eigen::VectorXd::LinSpaced(101, 0.0, 1.0);
  for (double theta : {0.0, 0.25, 0.5}) {
    Eigen::VectorXd out = forward(model, Eigen::VectorXd::Constant(1, theta));
    CHECK((out - model.biases.back()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("input dimension mismatch is rejected") {
  SurrogateModel model = small_net(6);
  CHECK_THROWS_AS(forward(model, Eigen::VectorXd::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("backprop gradients match central finite differences") {
  SurrogateModel model = small_net(42);
  RngStream rng(43);
  const int n = 7;
  Eigen::MatrixXd inputs(2, n), targets(4, n);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < 2; ++d) inputs(d, i) = rng.next_uniform(0.0, 0.5);
    for (int j = 0; j < 4; ++j) targets(j, i) = rng.next_double();
  }
  auto [cost, grads] = cost_and_gradients(model, inputs, targets);
  CHECK(cost > 0.0);

  const double h = 1e-5;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c) {
        SurrogateModel plus = model, minus = model;
        plus.weights[l](r, c) += h;
        minus.weights[l](r, c) -= h;
        const double numeric = (dataset_cost(plus, inputs, targets) -
                                dataset_cost(minus, inputs, targets)) /
                               (2 * h);
        CHECK(gradients_close(grads.weights[l](r, c), numeric));
      }
    }
    for (Eigen::Index r = 0; r < model.biases[l].size(); ++r) {
      SurrogateModel plus = model, minus = model;
      plus.biases[l](r) += h;
      minus.biases[l](r) -= h;
      const double numeric = (dataset_cost(plus, inputs, targets) -
                              dataset_cost(minus, inputs, targets)) /
                             (2 * h);
      CHECK(gradients_close(grads.biases[l](r), numeric));
    }
  }
}

TEST_CASE("input jacobian matches directional finite differences") {
  SurrogateModel model = small_net(7, {1, 6, 12, 25, 50, 11});
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 0.25);
  Eigen::MatrixXd jac = input_jacobian(model, theta);
  const double h = 1e-5;
  Eigen::VectorXd plus = forward(model, Eigen::VectorXd::Constant(1, 0.25 + h));
  Eigen::VectorXd minus =
      forward(model, Eigen::VectorXd::Constant(1, 0.25 - h));
  Eigen::VectorXd numeric = (plus - minus) / (2 * h);
  for (Eigen::Index j = 0; j < numeric.size(); ++j) {
    CHECK(gradients_close(jac(j, 0), numeric(j)));
  }
}

TEST_CASE("split sizes follow the floor-then-remainder rule") {
  auto s510 = split_sizes(510, 0.70, 0.15);
  CHECK(s510[0] == 357);
  CHECK(s510[1] == 76);
  CHECK(s510[2] == 77);
  auto s51 = split_sizes(51, 0.70, 0.15);
  CHECK(s51[0] == 35);
  CHECK(s51[1] == 7);
  CHECK(s51[2] == 9);
}

TEST_CASE("constant targets are fit to machine-level cost by the bias") {
  CalibrationDataset dataset = constant_dataset(0.5, 40, 21);
  TrainingConfig config;
  config.hidden_sizes = {6, 12};
  config.max_epochs = 10000;
  config.patience = 10000;
  config.target_cost = 1e-9;
  config.learning_rate = 1e-2;
  config.lr_decay = 0.9995;
  RngStream rng(3);
  auto [model, metrics] = train(dataset, config, rng);
  CHECK(metrics.train_cost.back() < 1e-8);
}

TEST_CASE("tiny datasets with an empty split partition are rejected") {
  CalibrationDataset dataset = constant_dataset(0.5, 3, 5);
  TrainingConfig config;
  RngStream rng(3);
  CHECK_THROWS_AS(train(dataset, config, rng), std::invalid_argument);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
  CalibrationDataset dataset = constant_dataset(0.25, 30, 11);
  TrainingConfig config;
  config.hidden_sizes = {5, 7};
  config.max_epochs = 200;
  config.patience = 200;
  auto run = [&]() {
    RngStream rng(77);
    auto [model, metrics] = train(dataset, config, rng);
    return surrogate_to_json(model, config, "x").dump();
  };
  CHECK(run() == run());
}

TEST_CASE("diverging optimization reports an error instead of NaN weights") {
  CalibrationDataset dataset = constant_dataset(0.75, 30, 11);
  TrainingConfig config;
  config.hidden_sizes = {5};
  config.learning_rate = 1e200;
  config.max_epochs = 2000;
  config.patience = 2000;
  RngStream rng(5);
  CHECK_THROWS_AS(train(dataset, config, rng), std::runtime_error);
}

TEST_CASE("best-so-far validation cost is non-increasing over checkpoints") {
  CalibrationDataset dataset = constant_dataset(0.5, 40, 21);
  TrainingConfig config;
  config.hidden_sizes = {6, 12};
  config.max_epochs = 500;
  config.patience = 500;
  RngStream rng(9);
  auto [model, metrics] = train(dataset, config, rng);
  REQUIRE(!metrics.checkpoint_val_costs.empty());
  for (std::size_t i = 1; i < metrics.checkpoint_val_costs.size(); ++i) {
    CHECK(metrics.checkpoint_val_costs[i] <=
          metrics.checkpoint_val_costs[i - 1]);
  }
  CHECK(metrics.best_val_cost == metrics.checkpoint_val_costs.back());
}

TEST_CASE("regression of a model against its own outputs is the identity") {
  SurrogateModel model = small_net(11, {1, 4, 9});
  std::vector<CalibrationExample> examples;
  std::vector<std::vector<double>> ideal;
  for (double theta : {0.0, 0.1, 0.2, 0.3, 0.4, 0.5}) {
    CalibrationExample example;
    example.theta = {theta};
    examples.push_back(example);
    ideal.push_back(forward_curve(model, {theta}));
  }
  Regression reg = evaluate_regression(model, examples, ideal);
  CHECK(!reg.degenerate);
  CHECK(reg.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(reg.intercept) < 1e-12);
  CHECK(reg.r == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("uniform 5% noise on [0,1] targets keeps R above 0.99") {
  RngStream rng(123);
  std::vector<double> targets, outputs;
  for (int i = 0; i < 5000; ++i) {
    const double t = static_cast<double>(i) / 4999.0;
    targets.push_back(t);
    outputs.push_back(t + rng.next_uniform(-0.05, 0.05));
  }
  Regression reg = regression_metrics(outputs, targets);
  CHECK(!reg.degenerate);
  CHECK(reg.r >= 0.99);
}

TEST_CASE("constant targets flag the regression as degenerate") {
  std::vector<double> targets(50, 0.5), outputs(50, 0.4);
  Regression reg = regression_metrics(outputs, targets);
  CHECK(reg.degenerate);
}

TEST_CASE("surrogate JSON round-trips the model exactly") {
  SurrogateModel model = small_net(21, {2, 5, 9});
  TrainingConfig config;
  Json j = surrogate_to_json(model, config, "deadbeef");
  SurrogateModel back = surrogate_from_json(j);
  Eigen::VectorXd theta(2);
  theta << 0.1, 0.4;
  CHECK((forward(model, theta) - forward(back, theta)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(j.at("dataset_hash") == "deadbeef");
}
