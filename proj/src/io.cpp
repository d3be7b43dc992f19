#include "qmag/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qmag/version.hpp"

namespace qmag {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep = ',') {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) fields.push_back(field);
  return fields;
}

std::vector<std::string> non_empty_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) {
    throw std::invalid_argument("malformed numeric field: " + s);
  }
  return v;
}

const char* source_name(CurveSource source) {
  return source == CurveSource::Unitary ? "unitary" : "lindblad";
}

CurveSource source_from_name(const std::string& name) {
  if (name == "unitary") return CurveSource::Unitary;
  if (name == "lindblad") return CurveSource::Lindblad;
  throw std::invalid_argument("unknown curve source: " + name);
}

const char* axis_name(ObservableAxis axis) {
  return axis == ObservableAxis::X ? "x" : "y";
}

ObservableAxis axis_from_name(const std::string& name) {
  if (name == "x") return ObservableAxis::X;
  if (name == "y") return ObservableAxis::Y;
  throw std::invalid_argument("unknown observable axis: " + name);
}

}  // namespace

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write file: " + path.string());
  }
  out << content;
  out.close();
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

std::string bytes_hash_hex(std::string_view bytes) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buffer;
}

std::string file_hash_hex(const std::filesystem::path& path) {
  return bytes_hash_hex(read_file(path));
}

Json grid_to_json(const ParameterGrid& grid) {
  Json axes = Json::array();
  for (const auto& axis : grid.axes) {
    axes.push_back({{"min", axis.min}, {"max", axis.max}, {"count", axis.count}});
  }
  return {{"axes", axes}};
}

ParameterGrid grid_from_json(const Json& j) {
  ParameterGrid grid;
  for (const auto& axis : j.at("axes")) {
    grid.axes.push_back(AxisSpec{axis.at("min").get<double>(),
                                 axis.at("max").get<double>(),
                                 axis.at("count").get<int>()});
  }
  return grid;
}

std::string curve_to_csv(const ObservableCurve& curve) {
  std::ostringstream out;
  out << "t,value\n";
  for (std::size_t j = 0; j < curve.times.size(); ++j) {
    out << format_double(curve.times[j]) << ','
        << format_double(curve.values[j]) << '\n';
  }
  return out.str();
}

ObservableCurve curve_from_csv(const std::string& text) {
  auto lines = non_empty_lines(text);
  if (lines.empty() || lines[0] != "t,value") {
    throw std::invalid_argument("curve CSV must start with 't,value'");
  }
  ObservableCurve curve;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split_line(lines[i]);
    if (fields.size() != 2) {
      throw std::invalid_argument("curve CSV row needs two fields");
    }
    curve.times.push_back(parse_double(fields[0]));
    curve.values.push_back(parse_double(fields[1]));
  }
  return curve;
}

Json curve_sidecar(const SpinChainModel& model, ObservableAxis axis,
                   CurveSource source, double gamma) {
  return {{"n_sites", model.n_sites},
          {"j_z", model.j_z},
          {"g_x", model.g_x},
          {"g_y", model.g_y},
          {"observable_axis", axis_name(axis)},
          {"source", source_name(source)},
          {"gamma", gamma},
          {"code_version", kCodeVersion}};
}

std::string calibration_to_csv(const CalibrationDataset& dataset) {
  std::ostringstream out;
  const int dims = dataset.input_dims();
  out << (dims == 1 ? "theta_1" : "theta_1,theta_2");
  const std::size_t n_t = dataset.times.size();
  for (std::size_t j = 1; j <= n_t; ++j) out << ",d_" << j;
  out << '\n';
  for (const auto& example : dataset.examples) {
    for (int d = 0; d < dims; ++d) {
      if (d) out << ',';
      out << format_double(example.theta[d]);
    }
    for (double v : example.target) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

Json calibration_sidecar(const CalibrationDataset& dataset) {
  Json j = {{"grid", grid_to_json(dataset.grid)},
            {"repetitions", dataset.repetitions},
            {"seed", dataset.seed},
            {"seed_scheme", "root.derive(\"calibration\", grid_index * repetitions + repetition)"},
            {"curve_source", source_name(dataset.source)},
            {"gamma", dataset.gamma},
            {"observable_axis", axis_name(dataset.axis)},
            {"n_sites", dataset.n_sites},
            {"j_z", dataset.j_z},
            {"times", dataset.times},
            {"code_version", kCodeVersion}};
  if (dataset.n_m) {
    j["n_m"] = *dataset.n_m;
  } else {
    j["n_m"] = nullptr;  // noise-free targets
  }
  return j;
}

CalibrationDataset calibration_from_files(const std::filesystem::path& csv,
                                          const std::filesystem::path& sidecar) {
  Json j = Json::parse(read_file(sidecar));
  CalibrationDataset dataset;
  dataset.grid = grid_from_json(j.at("grid"));
  dataset.repetitions = j.at("repetitions").get<int>();
  dataset.seed = j.at("seed").get<std::uint64_t>();
  dataset.source = source_from_name(j.at("curve_source").get<std::string>());
  dataset.gamma = j.at("gamma").get<double>();
  dataset.axis = axis_from_name(j.at("observable_axis").get<std::string>());
  dataset.n_sites = j.at("n_sites").get<int>();
  dataset.j_z = j.at("j_z").get<double>();
  dataset.times = j.at("times").get<std::vector<double>>();
  if (!j.at("n_m").is_null()) dataset.n_m = j.at("n_m").get<long long>();

  auto lines = non_empty_lines(read_file(csv));
  if (lines.empty()) {
    throw std::invalid_argument("calibration CSV is empty");
  }
  const int dims = dataset.grid.dims();
  const std::size_t expected = dims + dataset.times.size();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split_line(lines[i]);
    if (fields.size() != expected) {
      throw std::invalid_argument("calibration CSV row has wrong field count");
    }
    CalibrationExample example;
    for (int d = 0; d < dims; ++d) example.theta.push_back(parse_double(fields[d]));
    for (std::size_t f = dims; f < expected; ++f) {
      example.target.push_back(parse_double(fields[f]));
    }
    dataset.examples.push_back(std::move(example));
  }
  return dataset;
}

std::string observations_to_csv(const ObservationSet& obs) {
  std::ostringstream out;
  out << "t,X,N_p\n";
  for (std::size_t j = 0; j < obs.records.size(); ++j) {
    out << format_double(obs.times[j]) << ',' << obs.records[j].successes << ','
        << obs.records[j].trials << '\n';
  }
  return out.str();
}

Json observations_sidecar(const ObservationSet& obs, const SpinChainModel& model,
                          ObservableAxis axis, CurveSource source,
                          double gamma) {
  return {{"seed", obs.seed},
          {"true_field", obs.true_field},
          {"trials_per_instant", obs.trials_per_instant},
          {"n_sites", model.n_sites},
          {"j_z", model.j_z},
          {"observable_axis", axis_name(axis)},
          {"source", source_name(source)},
          {"gamma", gamma},
          {"code_version", kCodeVersion}};
}

ObservationSet observations_from_files(const std::filesystem::path& csv,
                                       const std::filesystem::path& sidecar) {
  Json j = Json::parse(read_file(sidecar));
  ObservationSet obs;
  obs.seed = j.at("seed").get<std::uint64_t>();
  obs.true_field = j.at("true_field").get<std::vector<double>>();
  obs.trials_per_instant = j.at("trials_per_instant").get<long long>();

  auto lines = non_empty_lines(read_file(csv));
  if (lines.empty() || lines[0] != "t,X,N_p") {
    throw std::invalid_argument("observations CSV must start with 't,X,N_p'");
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto fields = split_line(lines[i]);
    if (fields.size() != 3) {
      throw std::invalid_argument("observations CSV row needs three fields");
    }
    obs.times.push_back(parse_double(fields[0]));
    ShotRecord record;
    record.time_index = static_cast<int>(i - 1);
    record.successes = std::stoll(fields[1]);
    record.trials = std::stoll(fields[2]);
    obs.records.push_back(record);
  }
  return obs;
}

Json surrogate_to_json(const SurrogateModel& model, const TrainingConfig& config,
                       const std::string& dataset_hash) {
  Json layers = Json::array();
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    std::vector<double> w_row_major;
    w_row_major.reserve(model.weights[l].size());
    for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c) {
        w_row_major.push_back(model.weights[l](r, c));
      }
    }
    std::vector<double> b(model.biases[l].data(),
                          model.biases[l].data() + model.biases[l].size());
    layers.push_back({{"weights", w_row_major}, {"biases", b}});
  }
  return {{"layer_sizes", model.layer_sizes},
          {"layers", layers},
          {"input_center",
           std::vector<double>(model.input_center.data(),
                               model.input_center.data() + model.input_center.size())},
          {"input_halfwidth",
           std::vector<double>(model.input_halfwidth.data(),
                               model.input_halfwidth.data() +
                                   model.input_halfwidth.size())},
          {"training_config", training_config_to_json(config)},
          {"dataset_hash", dataset_hash},
          {"code_version", kCodeVersion}};
}

SurrogateModel surrogate_from_json(const Json& j) {
  SurrogateModel model;
  model.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
  auto center = j.at("input_center").get<std::vector<double>>();
  auto halfwidth = j.at("input_halfwidth").get<std::vector<double>>();
  model.input_center =
      Eigen::Map<Eigen::VectorXd>(center.data(), center.size());
  model.input_halfwidth =
      Eigen::Map<Eigen::VectorXd>(halfwidth.data(), halfwidth.size());
  const auto& layers = j.at("layers");
  for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
    const int rows = model.layer_sizes[l + 1];
    const int cols = model.layer_sizes[l];
    auto w = layers.at(l).at("weights").get<std::vector<double>>();
    auto b = layers.at(l).at("biases").get<std::vector<double>>();
    if (static_cast<int>(w.size()) != rows * cols ||
        static_cast<int>(b.size()) != rows) {
      throw std::invalid_argument("surrogate JSON layer shape mismatch");
    }
    Eigen::MatrixXd weight(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        weight(r, c) = w[static_cast<std::size_t>(r) * cols + c];
      }
    }
    model.weights.push_back(std::move(weight));
    model.biases.push_back(Eigen::Map<Eigen::VectorXd>(b.data(), b.size()));
  }
  return model;
}

std::string metrics_to_csv(const TrainingMetrics& metrics) {
  std::ostringstream out;
  out << "epoch,train_cost,val_cost,grad_norm\n";
  for (std::size_t e = 0; e < metrics.train_cost.size(); ++e) {
    out << (e + 1) << ',' << format_double(metrics.train_cost[e]) << ','
        << format_double(metrics.val_cost[e]) << ','
        << format_double(metrics.grad_norm[e]) << '\n';
  }
  return out.str();
}

std::string posterior_to_csv(const PosteriorGrid& post) {
  std::ostringstream out;
  out << (post.grid.dims() == 1 ? "theta_1,probability"
                                : "theta_1,theta_2,probability")
      << '\n';
  for (std::size_t i = 0; i < post.grid.node_count(); ++i) {
    for (double v : post.grid.node(i)) out << format_double(v) << ',';
    out << format_double(post.probabilities(static_cast<Eigen::Index>(i)))
        << '\n';
  }
  return out.str();
}

Json posterior_summary(const PosteriorGrid& post, const EstimateSummary& summary,
                       const std::string& forward_id,
                       const std::string& forward_hash,
                       const std::vector<std::uint64_t>& seeds) {
  return {{"theta_est", summary.mean},
          {"theta_std", summary.stddev},
          {"grid", grid_to_json(post.grid)},
          {"prior", post.prior_descriptor},
          {"forward_model", forward_id},
          {"forward_hash", forward_hash},
          {"seeds", seeds},
          {"code_version", kCodeVersion}};
}

std::string scaling_to_csv(const PrecisionExperiment& experiment) {
  std::ostringstream out;
  out << "N,theta_est_mean,delta_mean";
  const int dims =
      experiment.rows.empty() ? 1 : static_cast<int>(experiment.rows[0].theta_est_mean.size());
  for (int d = 2; d <= dims; ++d) {
    out << ",theta_est_mean_" << d << ",delta_mean_" << d;
  }
  out << '\n';
  for (const auto& row : experiment.rows) {
    out << row.n_sites;
    for (int d = 0; d < dims; ++d) {
      out << ',' << format_double(row.theta_est_mean[d]) << ','
          << format_double(row.theta_std_mean[d]);
    }
    out << '\n';
  }
  return out.str();
}

Json scaling_fit_json(const PrecisionExperiment& experiment) {
  Json fits = Json::array();
  for (const auto& fit : experiment.fits) {
    fits.push_back({{"exponent", fit.exponent},
                    {"prefactor", fit.prefactor},
                    {"residuals", fit.residuals},
                    {"sizes", fit.sizes},
                    {"precisions", fit.precisions}});
  }
  return {{"fits", fits}, {"code_version", kCodeVersion}};
}

Json training_config_to_json(const TrainingConfig& config) {
  return {{"hidden_sizes", config.hidden_sizes},
          {"max_epochs", config.max_epochs},
          {"target_cost", config.target_cost},
          {"learning_rate", config.learning_rate},
          {"lr_decay", config.lr_decay},
          {"beta1", config.beta1},
          {"beta2", config.beta2},
          {"epsilon", config.epsilon},
          {"train_fraction", config.train_fraction},
          {"val_fraction", config.val_fraction},
          {"split_seed", config.split_seed},
          {"patience", config.patience}};
}

TrainingConfig training_config_from_json(const Json& j) {
  TrainingConfig config;
  config.hidden_sizes = j.at("hidden_sizes").get<std::vector<int>>();
  config.max_epochs = j.at("max_epochs").get<int>();
  config.target_cost = j.at("target_cost").get<double>();
  config.learning_rate = j.at("learning_rate").get<double>();
  config.lr_decay = j.value("lr_decay", 1.0);
  config.beta1 = j.value("beta1", 0.9);
  config.beta2 = j.value("beta2", 0.999);
  config.epsilon = j.value("epsilon", 1e-8);
  config.train_fraction = j.at("train_fraction").get<double>();
  config.val_fraction = j.at("val_fraction").get<double>();
  config.split_seed = j.at("split_seed").get<std::uint64_t>();
  config.patience = j.at("patience").get<int>();
  return config;
}

}  // namespace qmag
