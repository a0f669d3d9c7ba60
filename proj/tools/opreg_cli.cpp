// opreg: batch driver for data generation, operator regression, simulation
// with learned models, comparison and export.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical blow-up or
// divergence, 4 I/O or format error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "opreg/errors.hpp"
#include "opreg/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool allow_unstable_dt = false;
};

opreg::ExperimentConfig load(const Common& c) {
  opreg::ExperimentConfig cfg = opreg::load_config(c.config);
  if (c.allow_unstable_dt) cfg.allow_unstable_dt = true;
  return cfg;
}

fs::path out_dir(const Common& c, const opreg::ExperimentConfig& cfg, const char* sub) {
  return c.out.empty() ? fs::path(cfg.output_dir) / sub : fs::path(c.out);
}

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "Experiment configuration (JSON with comments)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the seed used by this command");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_flag("--allow-unstable-dt", c.allow_unstable_dt, "Accept dt above the linear stability limit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operator regression toolkit for 1-D periodic PDE data"};
  app.require_subcommand(1);

  Common gen;
  auto* generate = app.add_subcommand("generate", "Simulate the reference equation from filtered-noise initial conditions");
  add_common(generate, gen, true);

  Common tr;
  std::string train_data;
  auto* train = app.add_subcommand("train", "Fit the operator model with the p-curriculum");
  add_common(train, tr, true);
  train->add_option("--data", train_data, "Manifest written by 'generate'")->required()->check(CLI::ExistingFile);

  Common sim;
  std::string sim_checkpoint;
  bool no_reference = false;
  auto* simulate = app.add_subcommand("simulate", "Evolve a fresh initial condition with a learned model");
  add_common(simulate, sim, true);
  simulate->add_option("--checkpoint", sim_checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  simulate->add_flag("--no-reference", no_reference, "Skip the paired reference trajectory");

  Common cmp;
  std::string ref_file, test_file;
  std::vector<double> spectrum_times;
  auto* compare = app.add_subcommand("compare", "Relative L2 error and spectrum ratios between two trajectories");
  add_common(compare, cmp, false);
  compare->add_option("reference", ref_file, "Reference trajectory")->required()->check(CLI::ExistingFile);
  compare->add_option("test", test_file, "Test trajectory")->required()->check(CLI::ExistingFile);
  compare->add_option("--spectrum-time", spectrum_times, "Times at which to report spectrum ratios");

  Common exp;
  std::string exp_checkpoint, exp_data;
  int bins = 101;
  auto* export_cmd = app.add_subcommand("export", "Write normalized curves, sample density and energy spectrum");
  add_common(export_cmd, exp, false);
  export_cmd->add_option("--checkpoint", exp_checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--data", exp_data, "Manifest of the training data")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--bins", bins, "Histogram bins for the sample density");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*generate) {
      opreg::ExperimentConfig cfg = load(gen);
      if (gen.seed) cfg.ic_seed = *gen.seed;
      const auto out = opreg::cmd_generate(cfg, out_dir(gen, cfg, "data"));
      std::cout << "wrote " << out.files.size() << " trajectories, manifest " << out.manifest.string() << "\n";
    } else if (*train) {
      opreg::ExperimentConfig cfg = load(tr);
      if (tr.seed) cfg.training.seed = *tr.seed;
      const auto out = opreg::cmd_train(cfg, train_data, out_dir(tr, cfg, "train"));
      const auto& h = out.result.history;
      std::cout << "trained " << h.size() << " iterations";
      if (!h.empty()) std::cout << ", final loss " << h.back().loss;
      std::cout << "\ncheckpoint " << out.checkpoint.string() << "\nloss history " << out.loss_csv.string() << "\n";
    } else if (*simulate) {
      opreg::ExperimentConfig cfg = load(sim);
      const std::uint64_t seed = sim.seed.value_or(cfg.test_seed);
      const auto out = opreg::cmd_simulate(cfg, sim_checkpoint, seed, out_dir(sim, cfg, "simulate"), !no_reference);
      std::cout << "learned trajectory " << out.learned.string() << "\n";
      if (out.reference) std::cout << "reference trajectory " << out.reference->string() << "\n";
    } else if (*compare) {
      const fs::path dir = cmp.out.empty() ? fs::path(".") : fs::path(cmp.out);
      const auto out = opreg::cmd_compare(ref_file, test_file, dir, spectrum_times);
      std::cout << "errors " << out.errors_csv.string() << "\nspectra " << out.spectra_csv.string() << "\n";
    } else if (*export_cmd) {
      const fs::path dir = exp.out.empty() ? fs::path(".") : fs::path(exp.out);
      for (const auto& p : opreg::cmd_export(exp_checkpoint, exp_data, dir, bins)) std::cout << p.string() << "\n";
    }
  } catch (const opreg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const opreg::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const opreg::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
