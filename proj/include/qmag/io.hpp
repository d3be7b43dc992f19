#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qmag/bayes.hpp"
#include "qmag/metrology.hpp"
#include "qmag/sampling.hpp"
#include "qmag/surrogate.hpp"

namespace qmag {

using Json = nlohmann::json;

/// 17 significant digits; round-trips every double bit-exactly and keeps
/// artifacts byte-identical across runs.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::string bytes_hash_hex(std::string_view bytes);
std::string file_hash_hex(const std::filesystem::path& path);

// Axis/grid serialization shared by several sidecars.
Json grid_to_json(const ParameterGrid& grid);
ParameterGrid grid_from_json(const Json& j);

// Observable curves: CSV `t,value` plus a JSON sidecar with the model
// parameters, axis, gamma and code version.
std::string curve_to_csv(const ObservableCurve& curve);
ObservableCurve curve_from_csv(const std::string& text);
Json curve_sidecar(const SpinChainModel& model, ObservableAxis axis,
                   CurveSource source, double gamma);

// Calibration datasets: CSV `theta_1[,theta_2],d_1,...` plus sidecar.
std::string calibration_to_csv(const CalibrationDataset& dataset);
Json calibration_sidecar(const CalibrationDataset& dataset);
CalibrationDataset calibration_from_files(const std::filesystem::path& csv,
                                          const std::filesystem::path& sidecar);

// Observation sets: CSV `t,X,N_p` plus sidecar.
std::string observations_to_csv(const ObservationSet& obs);
Json observations_sidecar(const ObservationSet& obs, const SpinChainModel& model,
                          ObservableAxis axis, CurveSource source, double gamma);
ObservationSet observations_from_files(const std::filesystem::path& csv,
                                       const std::filesystem::path& sidecar);

// Surrogate models: single JSON file with row-major weights, biases,
// normalization constants, a training-config echo and the dataset hash.
Json surrogate_to_json(const SurrogateModel& model, const TrainingConfig& config,
                       const std::string& dataset_hash);
SurrogateModel surrogate_from_json(const Json& j);

// Per-epoch training metrics: CSV `epoch,train_cost,val_cost,grad_norm`.
std::string metrics_to_csv(const TrainingMetrics& metrics);

// Posteriors: CSV `theta_1[,theta_2],probability` plus a JSON summary.
std::string posterior_to_csv(const PosteriorGrid& post);
Json posterior_summary(const PosteriorGrid& post, const EstimateSummary& summary,
                       const std::string& forward_id,
                       const std::string& forward_hash,
                       const std::vector<std::uint64_t>& seeds);

// Scaling experiments: CSV `N,theta_est_mean,delta_mean` (extra column pair
// per additional dimension) plus a JSON fit report.
std::string scaling_to_csv(const PrecisionExperiment& experiment);
Json scaling_fit_json(const PrecisionExperiment& experiment);

// Training config round-trip, used by the model file and the run config.
Json training_config_to_json(const TrainingConfig& config);
TrainingConfig training_config_from_json(const Json& j);

}  // namespace qmag
