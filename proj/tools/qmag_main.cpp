#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "qmag/harness.hpp"
#include "qmag/version.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config (JSON)")
      ->required();
  cmd->add_option("--out", opts.out_override, "override output directory");
  cmd->add_option("--seed", opts.seed_override, "override the root seed")
      ->each([&opts](const std::string&) { opts.seed_given = true; });
}

qmag::ExperimentConfig resolve(const CommonOpts& opts) {
  qmag::ExperimentConfig config = qmag::load_config(opts.config_path);
  if (!opts.out_override.empty()) config.output_dir = opts.out_override;
  if (opts.seed_given) config.seed = opts.seed_override;
  return config;
}

void print_artifacts(const std::vector<std::filesystem::path>& paths) {
  for (const auto& path : paths) {
    std::printf("%s\n", path.string().c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid spin-chain magnetometry pipeline"};
  app.set_version_flag("--version", qmag::kCodeVersion);
  app.require_subcommand(1);

  CommonOpts simulate_opts, calibrate_opts, train_opts, infer_opts, scale_opts,
      reproduce_opts;
  std::string dataset_path;
  std::string table;

  auto* simulate =
      app.add_subcommand("simulate", "exact curves over the scan grid");
  add_common(simulate, simulate_opts);
  auto* calibrate =
      app.add_subcommand("calibrate", "build the calibration dataset");
  add_common(calibrate, calibrate_opts);
  auto* train = app.add_subcommand("train", "train the surrogate network");
  add_common(train, train_opts);
  train->add_option("--dataset", dataset_path,
                    "calibration CSV (default <out>/calibration.csv)");
  auto* infer =
      app.add_subcommand("infer", "posterior over the field parameters");
  add_common(infer, infer_opts);
  auto* scale =
      app.add_subcommand("scale", "precision-versus-size experiment");
  add_common(scale, scale_opts);
  auto* reproduce = app.add_subcommand(
      "reproduce", "end-to-end reference-table reproduction with bands");
  add_common(reproduce, reproduce_opts);
  reproduce->add_option("--table", table, "one of A1, A2, A3")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*simulate) {
      print_artifacts(qmag::cmd_simulate(resolve(simulate_opts)));
    } else if (*calibrate) {
      print_artifacts(qmag::cmd_calibrate(resolve(calibrate_opts)));
    } else if (*train) {
      print_artifacts(qmag::cmd_train(resolve(train_opts), dataset_path));
    } else if (*infer) {
      print_artifacts(qmag::cmd_infer(resolve(infer_opts)));
    } else if (*scale) {
      print_artifacts(qmag::cmd_scale(resolve(scale_opts)));
    } else if (*reproduce) {
      print_artifacts(qmag::cmd_reproduce(resolve(reproduce_opts), table));
    }
  } catch (const qmag::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
