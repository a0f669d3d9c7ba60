#pragma once

// Experiment configuration and the generate / train / simulate / compare /
// export commands behind the CLI.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "opreg/dynamics.hpp"
#include "opreg/operator.hpp"
#include "opreg/training.hpp"
#include "json.hpp"

namespace opreg {

struct BranchFlags {
  Realness realness = Realness::real;
  Parity parity = Parity::none;
  bool conservation = true;
};

struct ExperimentConfig {
  EquationKind equation = EquationKind::fractional_heat;
  double coefficient = 0.01;
  GridConfig grid{192, 0.0};

  double dt = 0.05;
  std::size_t steps = 399;
  int save_stride = 1;
  double spinup_time = 0.0;

  double ic_kappa_cut = 21.0;
  double ic_amplitude = 1.0;
  int ic_count = 4;
  std::uint64_t ic_seed = 1;

  std::vector<int> layer_sizes = Mlp::default_layer_sizes();
  std::uint64_t model_seed = 7;
  double g_input_scale = 1.0;
  std::vector<BranchFlags> branches;

  TrainConfig training;

  std::uint64_t test_seed = 1001;
  std::size_t test_steps = 400;
  int test_save_stride = 1;
  std::vector<double> spectrum_times;

  std::string output_dir = "out";
  bool allow_unstable_dt = false;

  static ExperimentConfig fractional_heat_defaults();
  static ExperimentConfig ks_defaults();
  static ExperimentConfig burgers_defaults();
  static ExperimentConfig defaults_for(EquationKind kind);

  /// Throws ConfigError on inconsistencies, including dt above the linear
  /// stability limit unless allow_unstable_dt is set.
  void validate() const;
  RhsSpec reference_rhs() const;
  OperatorModel initial_model() const;
  std::size_t spinup_steps() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Manifest {
  EquationKind equation = EquationKind::fractional_heat;
  double coefficient = 0.0;
  std::vector<std::filesystem::path> files;  // absolute or relative to the manifest
  std::vector<std::uint64_t> seeds;
};

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);
std::vector<Trajectory> load_manifest_trajectories(const std::filesystem::path& manifest_path);

/// Training trajectory for initial condition alpha (spin-up included).
Trajectory generate_trajectory(const ExperimentConfig& cfg, std::uint64_t seed);

struct GenerateOutputs {
  std::filesystem::path manifest;
  std::vector<std::filesystem::path> files;
};
GenerateOutputs cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

struct TrainOutputs {
  std::filesystem::path checkpoint;
  std::filesystem::path loss_csv;
  std::vector<std::filesystem::path> stage_checkpoints;
  TrainResult result;
};
TrainOutputs cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& manifest,
                       const std::filesystem::path& out_dir);

struct SimulatePair {
  Trajectory learned;
  std::optional<Trajectory> reference;
};
/// Fresh initial condition (spun up with the reference equation when the
/// config has a spin-up window), evolved by the learned model and optionally
/// by the reference equation.
SimulatePair simulate_pair(const ExperimentConfig& cfg, const OperatorModel& model, std::uint64_t seed,
                           bool with_reference);

struct SimulateOutputs {
  std::filesystem::path learned;
  std::optional<std::filesystem::path> reference;
};
SimulateOutputs cmd_simulate(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                             std::uint64_t seed, const std::filesystem::path& out_dir, bool with_reference = true);

struct CompareOutputs {
  std::filesystem::path errors_csv;
  std::filesystem::path spectra_csv;
};
CompareOutputs cmd_compare(const std::filesystem::path& ref, const std::filesystem::path& test,
                           const std::filesystem::path& out_dir, const std::vector<double>& spectrum_times = {});

std::vector<std::filesystem::path> cmd_export(const std::filesystem::path& checkpoint,
                                              const std::filesystem::path& manifest,
                                              const std::filesystem::path& out_dir, int density_bins = 101);

/// Reference closure model matching the manifest's equation, if any.
std::optional<OperatorModel> reference_model(EquationKind kind, double coefficient, const GridConfig& grid);

}  // namespace opreg
