#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "qmag/harness.hpp"

using namespace qmag;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() /
                 ("qmag_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++));
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig config;
  config.seed = 20260810;
  config.output_dir = out.string();
  config.model.n_sites = 2;
  config.dataset.grid = ParameterGrid{{AxisSpec{0.0, 0.5, 9}}};
  config.dataset.n_t = 11;
  config.dataset.n_m = 50;
  config.dataset.repetitions = 2;
  config.training.hidden_sizes = {4, 6};
  config.training.max_epochs = 250;
  config.training.patience = 250;
  config.inference.grid = ParameterGrid{{AxisSpec{0.0, 0.5, 101}}};
  config.inference.n_p = 100;
  config.inference.runs = 2;
  config.inference.true_field = {0.2};
  config.inference.forward = "exact";
  config.scale.sizes = {2, 4};
  config.reproduce.sizes = {2};
  return config;
}

int run_cli(const std::string& args) {
  const std::string command =
      std::string(QMAG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config round-trips through JSON losslessly") {
  ExperimentConfig config = tiny_config("/tmp/qmag-roundtrip");
  config.scale.model_paths[4] = "m4.json";
  Json j = config_to_json(config);
  ExperimentConfig back = config_from_json(j);
  CHECK(config_to_json(back).dump() == j.dump());
}

TEST_CASE("a config without a seed is rejected") {
  Json j = {{"output_dir", "/tmp/x"}};
  CHECK_THROWS_AS(config_from_json(j), UsageError);
}

TEST_CASE("missing or malformed config files are usage errors") {
  CHECK_THROWS_AS(load_config("/does/not/exist.json"), UsageError);
  fs::path bad = fresh_dir("badcfg");
  fs::create_directories(bad);
  std::ofstream(bad / "c.json") << "{ not json";
  CHECK_THROWS_AS(load_config(bad / "c.json"), UsageError);
}

TEST_CASE("calibrate runs are deterministic and fully manifested") {
  fs::path out_a = fresh_dir("cal_a");
  fs::path out_b = fresh_dir("cal_b");
  ExperimentConfig config = tiny_config(out_a);
  cmd_calibrate(config);
  config.output_dir = out_b.string();
  cmd_calibrate(config);

  CHECK(read_file(out_a / "calibration.csv") ==
        read_file(out_b / "calibration.csv"));
  CHECK(read_file(out_a / "calibration.json") ==
        read_file(out_b / "calibration.json"));

  Json manifest = Json::parse(read_file(out_a / "run_manifest.json"));
  CHECK(manifest.at("artifacts").contains("calibration.csv"));
  CHECK(manifest.at("artifacts").contains("calibration.json"));
  CHECK(manifest.at("artifacts").at("calibration.csv") ==
        file_hash_hex(out_a / "calibration.csv"));
  Json manifest_b = Json::parse(read_file(out_b / "run_manifest.json"));
  CHECK(manifest.at("artifacts") == manifest_b.at("artifacts"));
  CHECK(manifest.at("config_hash") != manifest_b.at("config_hash"));
  CHECK(!fs::exists(out_a / ".staging"));
  CHECK(!fs::exists(out_a / ".lock"));
}

TEST_CASE("a failing stage leaves no partial outputs behind") {
  fs::path out = fresh_dir("fail");
  ExperimentConfig config = tiny_config(out);
  CHECK_THROWS_AS(cmd_train(config, "/nonexistent/calibration.csv"),
                  UsageError);
  CHECK(!fs::exists(out / "model.json"));
  CHECK(!fs::exists(out / "training_metrics.csv"));
  CHECK(!fs::exists(out / "run_manifest.json"));
  CHECK(!fs::exists(out / ".staging"));
  CHECK(!fs::exists(out / ".lock"));
}

TEST_CASE("a held lock blocks a second run") {
  fs::path out = fresh_dir("lock");
  fs::create_directories(out / ".lock");
  ExperimentConfig config = tiny_config(out);
  CHECK_THROWS_AS(cmd_calibrate(config), UsageError);
}

TEST_CASE("train consumes the calibrate artifact and manifests its inputs") {
  fs::path out = fresh_dir("train");
  ExperimentConfig config = tiny_config(out);
  cmd_calibrate(config);
  cmd_train(config);
  CHECK(fs::exists(out / "model.json"));
  CHECK(fs::exists(out / "training_metrics.csv"));
  Json manifest = Json::parse(read_file(out / "run_manifest.json"));
  bool saw_csv_input = false;
  for (const auto& input : manifest.at("inputs")) {
    if (input.at("label") == "calibration_csv") saw_csv_input = true;
  }
  CHECK(saw_csv_input);

  Json model = Json::parse(read_file(out / "model.json"));
  CHECK(model.at("dataset_hash") == file_hash_hex(out / "calibration.csv"));
  CHECK(model.at("layer_sizes") == Json(std::vector<int>{1, 4, 6, 11}));
}

TEST_CASE("infer with the exact forward recovers the truth region") {
  fs::path out = fresh_dir("infer");
  ExperimentConfig config = tiny_config(out);
  cmd_infer(config);
  CHECK(fs::exists(out / "posterior.csv"));
  CHECK(fs::exists(out / "observations.csv"));
  Json summary = Json::parse(read_file(out / "posterior_summary.json"));
  const double est = summary.at("theta_est")[0].get<double>();
  const double sd = summary.at("theta_std")[0].get<double>();
  CHECK(std::abs(est - 0.2) < 5.0 * sd);
  CHECK(summary.at("forward_model") == "exact");
}

TEST_CASE("simulate emits one curve file pair per grid point") {
  fs::path out = fresh_dir("simulate");
  ExperimentConfig config = tiny_config(out);
  cmd_simulate(config);
  for (int g = 0; g < 9; ++g) {
    char name[64];
    std::snprintf(name, sizeof(name), "curve_%05d", g);
    CHECK(fs::exists(out / "curves" / (std::string(name) + ".csv")));
    CHECK(fs::exists(out / "curves" / (std::string(name) + ".json")));
  }
  ObservableCurve curve =
      curve_from_csv(read_file(out / "curves" / "curve_00000.csv"));
  CHECK(curve.times.size() == 11);
  for (double v : curve.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("scale with the exact forward emits a fit") {
  fs::path out = fresh_dir("scale");
  ExperimentConfig config = tiny_config(out);
  config.inference.forward = "exact";
  config.inference.runs = 2;
  config.inference.grid = ParameterGrid{{AxisSpec{0.0, 0.5, 51}}};
  config.inference.true_field = {0.1};
  cmd_scale(config);
  Json fit = Json::parse(read_file(out / "scaling_fit.json"));
  CHECK(fit.at("fits").size() == 1);
  CHECK(fs::exists(out / "scaling.csv"));
}

TEST_CASE("CLI maps bad invocations to exit code 2") {
  CHECK(run_cli("") == 2);
  CHECK(run_cli("bogus") == 2);
  CHECK(run_cli("infer") == 2);                    // missing --config
  CHECK(run_cli("infer --config /nope.json") == 2);  // missing file
  CHECK(run_cli("reproduce --config /nope.json") == 2);  // missing --table
  CHECK(run_cli("--help") == 0);
}

TEST_CASE("CLI happy path returns 0 and honors --out") {
  fs::path out = fresh_dir("cli");
  fs::create_directories(out);
  ExperimentConfig config = tiny_config(out / "ignored");
  Json j = config_to_json(config);
  const fs::path config_path = out / "config.json";
  write_file(config_path, j.dump(2));
  const std::string base = "--config " + config_path.string() + " --out " +
                           (out / "run").string();
  REQUIRE(run_cli("calibrate " + base) == 0);
  REQUIRE(run_cli("train " + base) == 0);
  CHECK(fs::exists(out / "run" / "model.json"));
  // seed override changes the dataset
  REQUIRE(run_cli("calibrate --config " + config_path.string() + " --out " +
                  (out / "run2").string() + " --seed 999") == 0);
  CHECK(read_file(out / "run" / "calibration.csv") !=
        read_file(out / "run2" / "calibration.csv"));
}
