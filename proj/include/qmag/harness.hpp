#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qmag/io.hpp"

namespace qmag {

/// Bad invocation or malformed configuration; the CLI maps this to exit
/// code 2 (computation failures map to 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelSpec {
  int n_sites = 8;
  double j_z = 0.0;
  double gamma = 0.0;
  CurveSource dynamics = CurveSource::Unitary;
  ObservableAxis axis = ObservableAxis::X;
};

struct DatasetSpec {
  ParameterGrid grid = calibration_grid_1d();
  int n_t = 101;
  double t_final = 5.0;
  std::optional<long long> n_m = 100;  // absent: noise-free targets
  int repetitions = 10;
};

struct InferenceSpec {
  ParameterGrid grid = default_grid_1d();
  long long n_p = 100;
  int runs = 10;
  std::vector<double> true_field = {0.1};
  std::string forward = "surrogate";  // or "exact"
  std::string model_path;             // surrogate file; empty: <out>/model.json
  std::string observations_path;      // empty: simulate synthetically
};

struct ScaleSpec {
  std::vector<int> sizes = {4, 6, 8};
  std::map<int, std::string> model_paths;  // per-N surrogate files
};

struct ReproduceSpec {
  std::vector<int> sizes = {4, 6, 8, 10};
};

/// One file describing a full run; every stage reads only what it needs.
/// All randomness flows from `seed` through labeled derivation.
struct ExperimentConfig {
  int schema_version = 1;
  std::uint64_t seed = 0;
  std::string output_dir;
  ModelSpec model;
  DatasetSpec dataset;
  TrainingConfig training;
  InferenceSpec inference;
  ScaleSpec scale;
  ReproduceSpec reproduce;

  std::vector<double> times() const;
};

Json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Written at the end of every successful run.
struct RunManifest {
  std::string config_hash;
  std::string code_version;
  std::string started_at;
  std::string finished_at;
  std::vector<std::array<std::string, 3>> inputs;  // label, path, hash
  std::map<std::string, std::string> artifact_hashes;
};

/// Staging-then-rename writer. Artifacts accumulate under
/// <out>/.staging/ and move into <out>/ only on commit, so a failed run
/// leaves no partial outputs in the final location. The run holds
/// <out>/.lock for its lifetime.
class RunDir {
 public:
  RunDir(std::filesystem::path out, const Json& config_echo);
  ~RunDir();
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;

  void stage(const std::string& relative_path, std::string_view content);
  /// Registers (and hashes) an input file the run depends on.
  void record_input(const std::string& label, const std::filesystem::path& file);
  /// Moves staged files into place and writes run_manifest.json.
  std::vector<std::filesystem::path> commit();

  const std::filesystem::path& out() const { return out_; }

 private:
  std::filesystem::path out_;
  std::filesystem::path staging_;
  std::filesystem::path lock_;
  RunManifest manifest_;
  std::vector<std::string> staged_;
  bool committed_ = false;
};

// One function per CLI verb. Each returns the artifact paths it produced.
std::vector<std::filesystem::path> cmd_simulate(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_calibrate(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_train(const ExperimentConfig& config,
                                             std::string dataset_csv = {});
std::vector<std::filesystem::path> cmd_infer(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_scale(const ExperimentConfig& config);

/// End-to-end reproduction of one of the three reference tables (A1: single
/// estimation runs vs N; A2: 10-run averages over four field strengths;
/// A3: the 2D variant). Emits the table and a per-cell comparison against
/// the reference values: means within +-0.01, standard deviations within a
/// factor of 2.
std::vector<std::filesystem::path> cmd_reproduce(const ExperimentConfig& config,
                                                 const std::string& table);

}  // namespace qmag
