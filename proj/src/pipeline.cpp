#include "opreg/pipeline.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "opreg/analysis.hpp"
#include "opreg/errors.hpp"
#include "opreg/io.hpp"

namespace opreg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<BranchFlags> default_branch_flags() {
  return {{Realness::real, Parity::even, true},
          {Realness::real, Parity::odd, true},
          {Realness::imaginary, Parity::even, true},
          {Realness::imaginary, Parity::odd, true}};
}

}  // namespace

ExperimentConfig ExperimentConfig::fractional_heat_defaults() {
  ExperimentConfig c;
  c.equation = EquationKind::fractional_heat;
  c.coefficient = 0.01;
  c.grid = {192, 2.0 * std::numbers::pi};
  c.dt = 0.05;
  c.steps = 399;
  c.save_stride = 1;
  c.spinup_time = 0.0;
  c.ic_kappa_cut = 21.0;
  c.branches = default_branch_flags();
  c.test_steps = 400;
  c.test_save_stride = 1;
  c.spectrum_times = {20.0};
  c.output_dir = "out/fractional_heat";
  return c;
}

ExperimentConfig ExperimentConfig::ks_defaults() {
  ExperimentConfig c;
  c.equation = EquationKind::ks;
  c.coefficient = 0.0;
  c.grid = {192, 32.0 * std::numbers::pi};
  c.dt = 2e-3;
  c.steps = 1999;
  c.save_stride = 1;
  c.spinup_time = 20.0;
  c.ic_kappa_cut = 1.5;
  c.branches = default_branch_flags();
  c.test_steps = 25000;
  c.test_save_stride = 50;
  c.spectrum_times = {50.0};
  c.output_dir = "out/ks";
  return c;
}

ExperimentConfig ExperimentConfig::burgers_defaults() {
  ExperimentConfig c;
  c.equation = EquationKind::burgers;
  c.coefficient = 0.0;
  c.grid = {192, 2.0 * std::numbers::pi};
  c.dt = 2e-4;
  c.steps = 1999;
  c.ic_kappa_cut = 10.0;
  c.branches = default_branch_flags();
  c.test_steps = 2000;
  c.test_save_stride = 10;
  c.output_dir = "out/burgers";
  return c;
}

ExperimentConfig ExperimentConfig::defaults_for(EquationKind kind) {
  switch (kind) {
    case EquationKind::fractional_heat:
      return fractional_heat_defaults();
    case EquationKind::ks:
      return ks_defaults();
    case EquationKind::burgers:
      return burgers_defaults();
    case EquationKind::learned:
      break;
  }
  throw ConfigError("experiments must use a reference equation (fractional_heat, ks or burgers)");
}

void ExperimentConfig::validate() const {
  try {
    grid.validate();
    training.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (equation == EquationKind::learned) throw ConfigError("equation kind 'learned' is not a data source");
  if (equation == EquationKind::fractional_heat && !(coefficient > 0.0)) {
    throw ConfigError("fractional heat coefficient must be positive");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (save_stride < 1 || test_save_stride < 1) throw ConfigError("save strides must be >= 1");
  if (spinup_time < 0.0) throw ConfigError("spinup_time must be >= 0");
  if (ic_count < 1) throw ConfigError("initial condition count must be >= 1");
  if (!(ic_amplitude > 0.0)) throw ConfigError("initial condition amplitude must be positive");
  if (test_steps < 1) throw ConfigError("test steps must be >= 1");
  if (!(g_input_scale > 0.0)) throw ConfigError("g_input_scale must be positive");
  if (branches.empty()) throw ConfigError("model needs at least one branch");
  const double kmax = grid.base_wavenumber() * grid.cutoff_bin();
  if (!(ic_kappa_cut >= grid.base_wavenumber()) || ic_kappa_cut > kmax) {
    throw ConfigError("initial condition kappa_cut must lie in [" + std::to_string(grid.base_wavenumber()) + ", " +
                      std::to_string(kmax) + "]");
  }
  const double limit = linear_stability_limit(equation, coefficient, grid);
  if (dt > limit && !allow_unstable_dt) {
    throw ConfigError("dt = " + std::to_string(dt) + " exceeds the explicit Euler stability limit " +
                      std::to_string(limit) + " of the " + equation_name(equation) +
                      " linear operator on the dealiased band; pass --allow-unstable-dt to override");
  }
}

RhsSpec ExperimentConfig::reference_rhs() const {
  switch (equation) {
    case EquationKind::fractional_heat:
      return RhsSpec::fractional_heat(coefficient);
    case EquationKind::ks:
      return RhsSpec::ks();
    case EquationKind::burgers:
      return RhsSpec::burgers();
    case EquationKind::learned:
      break;
  }
  throw ConfigError("no reference equation configured");
}

OperatorModel ExperimentConfig::initial_model() const {
  OperatorModel m{grid, DealiasMask::two_thirds(grid), {}, g_input_scale};
  std::uint64_t s = model_seed;
  try {
    for (const BranchFlags& f : branches) {
      OperatorBranch b;
      b.g = Mlp::initialized(layer_sizes, s++);
      b.h = Mlp::initialized(layer_sizes, s++);
      b.g_realness = f.realness;
      b.h_parity = f.parity;
      b.conservation = f.conservation;
      m.branches.push_back(std::move(b));
    }
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return m;
}

std::size_t ExperimentConfig::spinup_steps() const {
  return static_cast<std::size_t>(std::llround(spinup_time / dt));
}

// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  try {
    check_keys(j, {"equation", "grid", "time", "initial_conditions", "model", "training", "test", "output_dir",
                   "allow_unstable_dt"},
               "config");
    if (!j.contains("equation") || !j.at("equation").contains("kind")) {
      throw ConfigError("config: equation.kind is required");
    }
    const json& eq = j.at("equation");
    check_keys(eq, {"kind", "coefficient"}, "equation");
    ExperimentConfig c;
    try {
      c = ExperimentConfig::defaults_for(parse_equation(eq.at("kind").get<std::string>()));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    read_opt(eq, "coefficient", c.coefficient);

    if (j.contains("grid")) {
      const json& g = j.at("grid");
      check_keys(g, {"n", "length", "length_over_pi"}, "grid");
      read_opt(g, "n", c.grid.n);
      if (g.contains("length") && g.contains("length_over_pi")) {
        throw ConfigError("grid: give either length or length_over_pi, not both");
      }
      read_opt(g, "length", c.grid.length);
      if (g.contains("length_over_pi")) c.grid.length = g.at("length_over_pi").get<double>() * std::numbers::pi;
    }
    if (j.contains("time")) {
      const json& t = j.at("time");
      check_keys(t, {"dt", "steps", "save_stride", "spinup_time"}, "time");
      read_opt(t, "dt", c.dt);
      read_opt(t, "steps", c.steps);
      read_opt(t, "save_stride", c.save_stride);
      read_opt(t, "spinup_time", c.spinup_time);
    }
    if (j.contains("initial_conditions")) {
      const json& ic = j.at("initial_conditions");
      check_keys(ic, {"kappa_cut", "amplitude", "count", "seed"}, "initial_conditions");
      read_opt(ic, "kappa_cut", c.ic_kappa_cut);
      read_opt(ic, "amplitude", c.ic_amplitude);
      read_opt(ic, "count", c.ic_count);
      read_opt(ic, "seed", c.ic_seed);
    }
    if (j.contains("model")) {
      const json& m = j.at("model");
      check_keys(m, {"layer_sizes", "seed", "g_input_scale", "branches"}, "model");
      read_opt(m, "layer_sizes", c.layer_sizes);
      read_opt(m, "seed", c.model_seed);
      read_opt(m, "g_input_scale", c.g_input_scale);
      if (m.contains("branches")) {
        c.branches.clear();
        for (const json& b : m.at("branches")) {
          check_keys(b, {"realness", "parity", "conservation"}, "model.branches[]");
          BranchFlags f;
          try {
            if (b.contains("realness")) f.realness = parse_realness(b.at("realness").get<std::string>());
            if (b.contains("parity")) f.parity = parse_parity(b.at("parity").get<std::string>());
          } catch (const FormatError& e) {
            throw ConfigError(e.what());
          }
          read_opt(b, "conservation", f.conservation);
          c.branches.push_back(f);
        }
      }
    }
    if (j.contains("training")) {
      const json& t = j.at("training");
      check_keys(t, {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "iterations_per_stage", "p_schedule",
                     "seed"},
                 "training");
      read_opt(t, "learning_rate", c.training.learning_rate);
      read_opt(t, "beta1", c.training.beta1);
      read_opt(t, "beta2", c.training.beta2);
      read_opt(t, "epsilon", c.training.epsilon);
      read_opt(t, "batch_size", c.training.batch_size);
      read_opt(t, "iterations_per_stage", c.training.iterations_per_stage);
      read_opt(t, "p_schedule", c.training.p_schedule);
      read_opt(t, "seed", c.training.seed);
    }
    if (j.contains("test")) {
      const json& t = j.at("test");
      check_keys(t, {"seed", "steps", "save_stride", "spectrum_times"}, "test");
      read_opt(t, "seed", c.test_seed);
      read_opt(t, "steps", c.test_steps);
      read_opt(t, "save_stride", c.test_save_stride);
      read_opt(t, "spectrum_times", c.spectrum_times);
    }
    read_opt(j, "output_dir", c.output_dir);
    read_opt(j, "allow_unstable_dt", c.allow_unstable_dt);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json config_to_json(const ExperimentConfig& c) {
  json branches = json::array();
  for (const BranchFlags& f : c.branches) {
    branches.push_back(
        {{"realness", realness_name(f.realness)}, {"parity", parity_name(f.parity)}, {"conservation", f.conservation}});
  }
  return {{"equation", {{"kind", equation_name(c.equation)}, {"coefficient", c.coefficient}}},
          {"grid", {{"n", c.grid.n}, {"length", c.grid.length}}},
          {"time", {{"dt", c.dt}, {"steps", c.steps}, {"save_stride", c.save_stride}, {"spinup_time", c.spinup_time}}},
          {"initial_conditions",
           {{"kappa_cut", c.ic_kappa_cut}, {"amplitude", c.ic_amplitude}, {"count", c.ic_count}, {"seed", c.ic_seed}}},
          {"model",
           {{"layer_sizes", c.layer_sizes},
            {"seed", c.model_seed},
            {"g_input_scale", c.g_input_scale},
            {"branches", branches}}},
          {"training",
           {{"learning_rate", c.training.learning_rate},
            {"beta1", c.training.beta1},
            {"beta2", c.training.beta2},
            {"epsilon", c.training.epsilon},
            {"batch_size", c.training.batch_size},
            {"iterations_per_stage", c.training.iterations_per_stage},
            {"p_schedule", c.training.p_schedule},
            {"seed", c.training.seed}}},
          {"test",
           {{"seed", c.test_seed},
            {"steps", c.test_steps},
            {"save_stride", c.test_save_stride},
            {"spectrum_times", c.spectrum_times}}},
          {"output_dir", c.output_dir},
          {"allow_unstable_dt", c.allow_unstable_dt}};
}

ExperimentConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  try {
    return config_from_json(parse_json_text(text, path.string()));
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------

void write_manifest(const fs::path& path, const Manifest& m) {
  json files = json::array();
  for (const fs::path& f : m.files) files.push_back(f.generic_string());
  const json j = {{"format", "opreg-manifest"},
                  {"version", 1},
                  {"equation", equation_name(m.equation)},
                  {"coefficient", hex_double(m.coefficient)},
                  {"files", files},
                  {"seeds", m.seeds}};
  write_file_atomic(path, j.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& path) {
  const json j = parse_json_text(read_file(path), path.string());
  try {
    if (j.at("format") != "opreg-manifest") throw FormatError(path.string() + ": not a manifest");
    Manifest m;
    m.equation = parse_equation(j.at("equation").get<std::string>());
    m.coefficient = parse_hex_double(j.at("coefficient").get<std::string>());
    for (const json& f : j.at("files")) m.files.emplace_back(f.get<std::string>());
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<Trajectory> load_manifest_trajectories(const fs::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  std::vector<Trajectory> out;
  for (const fs::path& f : m.files) {
    out.push_back(read_trajectory(f.is_absolute() ? f : manifest_path.parent_path() / f));
  }
  if (out.empty()) throw FormatError(manifest_path.string() + ": manifest lists no trajectories");
  return out;
}

Trajectory generate_trajectory(const ExperimentConfig& cfg, std::uint64_t seed) {
  const RhsSpec rhs = cfg.reference_rhs();
  Field u = filtered_noise_ic(cfg.grid, cfg.ic_kappa_cut, cfg.ic_amplitude, seed);
  const std::size_t spin = cfg.spinup_steps();
  if (spin > 0) u = advance(rhs, u, cfg.dt, spin);
  return simulate(rhs, u, cfg.dt, cfg.steps, cfg.save_stride, static_cast<double>(spin) * cfg.dt);
}

GenerateOutputs cmd_generate(const ExperimentConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  GenerateOutputs out;
  Manifest manifest{cfg.equation, cfg.coefficient, {}, {}};
  for (int a = 0; a < cfg.ic_count; ++a) {
    const std::uint64_t seed = cfg.ic_seed + static_cast<std::uint64_t>(a);
    const Trajectory traj = generate_trajectory(cfg, seed);
    char name[32];
    std::snprintf(name, sizeof(name), "traj_%03d.oprg", a);
    write_trajectory(out_dir / name, traj);
    out.files.push_back(out_dir / name);
    manifest.files.emplace_back(name);
    manifest.seeds.push_back(seed);
  }
  out.manifest = out_dir / "manifest.json";
  write_manifest(out.manifest, manifest);
  return out;
}

TrainOutputs cmd_train(const ExperimentConfig& cfg, const fs::path& manifest, const fs::path& out_dir) {
  cfg.validate();
  const std::vector<Trajectory> trajs = load_manifest_trajectories(manifest);
  for (const Trajectory& t : trajs) {
    if (!(t.grid == cfg.grid)) throw ConfigError("trajectory grid does not match the configured grid");
  }
  TrainOutputs out;
  const StageCallback on_stage = [&](int p, const OperatorModel& model) {
    char name[48];
    std::snprintf(name, sizeof(name), "checkpoints/stage_p%02d.json", p);
    write_checkpoint(out_dir / name, model);
    out.stage_checkpoints.push_back(out_dir / name);
  };
  out.result = train_curriculum(cfg.initial_model(), trajs, cfg.training, on_stage);

  out.checkpoint = out_dir / "model.json";
  write_checkpoint(out.checkpoint, out.result.model);
  CsvTable loss{{"iteration", "p", "loss"}, {}};
  for (const LossRecord& r : out.result.history) {
    loss.rows.push_back({std::to_string(r.iteration), std::to_string(r.p), format_double(r.loss)});
  }
  out.loss_csv = out_dir / "loss.csv";
  write_csv(out.loss_csv, loss);
  return out;
}

SimulatePair simulate_pair(const ExperimentConfig& cfg, const OperatorModel& model, std::uint64_t seed,
                           bool with_reference) {
  if (!(model.grid == cfg.grid)) throw ConfigError("checkpoint grid does not match the configured grid");
  const RhsSpec reference = cfg.reference_rhs();
  Field u = filtered_noise_ic(cfg.grid, cfg.ic_kappa_cut, cfg.ic_amplitude, seed);
  const std::size_t spin = cfg.spinup_steps();
  if (spin > 0) u = advance(reference, u, cfg.dt, spin);
  const double t0 = static_cast<double>(spin) * cfg.dt;
  const RhsSpec learned = RhsSpec::learned(std::make_shared<const OperatorModel>(model));
  SimulatePair pair{simulate(learned, u, cfg.dt, cfg.test_steps, cfg.test_save_stride, t0), std::nullopt};
  if (with_reference) pair.reference = simulate(reference, u, cfg.dt, cfg.test_steps, cfg.test_save_stride, t0);
  return pair;
}

SimulateOutputs cmd_simulate(const ExperimentConfig& cfg, const fs::path& checkpoint, std::uint64_t seed,
                             const fs::path& out_dir, bool with_reference) {
  cfg.validate();
  const OperatorModel model = read_checkpoint(checkpoint);
  const SimulatePair pair = simulate_pair(cfg, model, seed, with_reference);
  SimulateOutputs out;
  out.learned = out_dir / "learned.oprg";
  write_trajectory(out.learned, pair.learned);
  if (pair.reference) {
    out.reference = out_dir / "reference.oprg";
    write_trajectory(*out.reference, *pair.reference);
  }
  return out;
}

CompareOutputs cmd_compare(const fs::path& ref_path, const fs::path& test_path, const fs::path& out_dir,
                           const std::vector<double>& spectrum_times) {
  const Trajectory ref = read_trajectory(ref_path);
  const Trajectory test = read_trajectory(test_path);
  std::vector<std::size_t> indices;
  if (spectrum_times.empty()) {
    indices.push_back(ref.snapshots.size() - 1);
  } else {
    for (double t : spectrum_times) {
      const double pos = (t - ref.t0) / ref.snapshot_spacing();
      const auto idx = static_cast<long long>(std::llround(pos));
      if (idx < 0 || static_cast<std::size_t>(idx) >= ref.snapshots.size()) {
        throw ConfigError("spectrum time " + format_double(t) + " lies outside the compared trajectories");
      }
      indices.push_back(static_cast<std::size_t>(idx));
    }
  }
  ErrorReport report;
  try {
    report = compare_solutions(ref, test, indices);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  CsvTable errors{{"time", "relative_l2"}, {}};
  for (std::size_t i = 0; i < report.times.size(); ++i) {
    errors.rows.push_back({format_double(report.times[i]), format_double(report.relative_l2[i])});
  }
  const std::vector<double> kappas = wavenumbers(ref.grid);
  CsvTable spectra{{"time", "bin", "kappa", "reference_energy", "test_energy", "ratio"}, {}};
  for (std::size_t s = 0; s < indices.size(); ++s) {
    const std::vector<double> er = energy_spectrum(ref.snapshots[indices[s]]);
    const std::vector<double> et = energy_spectrum(test.snapshots[indices[s]]);
    for (std::size_t k = 0; k < kappas.size(); ++k) {
      spectra.rows.push_back({format_double(report.spectrum_times[s]), std::to_string(k), format_double(kappas[k]),
                              format_double(er[k]), format_double(et[k]),
                              format_double(report.spectrum_ratio[s][k])});
    }
  }
  CompareOutputs out{out_dir / "errors.csv", out_dir / "spectrum_ratio.csv"};
  write_csv(out.errors_csv, errors);
  write_csv(out.spectra_csv, spectra);
  return out;
}

std::optional<OperatorModel> reference_model(EquationKind kind, double coefficient, const GridConfig& grid) {
  switch (kind) {
    case EquationKind::fractional_heat:
      return fractional_heat_exact_model(grid, coefficient);
    case EquationKind::ks:
      return ks_exact_model(grid);
    case EquationKind::burgers:
      return burgers_exact_model(grid);
    case EquationKind::learned:
      break;
  }
  return std::nullopt;
}

namespace {

CsvTable curve_csv(const CurveTable& learned, const std::optional<CurveTable>& reference) {
  CsvTable t;
  t.header.push_back(learned.abscissa_label);
  for (const std::string& l : learned.labels) t.header.push_back(l);
  if (reference) {
    for (const std::string& l : reference->labels) t.header.push_back("ref_" + l);
  }
  for (std::size_t i = 0; i < learned.abscissa.size(); ++i) {
    std::vector<std::string> row{format_double(learned.abscissa[i])};
    for (const auto& col : learned.columns) row.push_back(format_double(col[i]));
    if (reference) {
      for (const auto& col : reference->columns) row.push_back(format_double(col[i]));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace

std::vector<fs::path> cmd_export(const fs::path& checkpoint, const fs::path& manifest_path, const fs::path& out_dir,
                                 int density_bins) {
  const OperatorModel model = read_checkpoint(checkpoint);
  const Manifest manifest = read_manifest(manifest_path);
  const std::vector<Trajectory> trajs = load_manifest_trajectories(manifest_path);
  for (const Trajectory& t : trajs) {
    if (!(t.grid == model.grid)) throw ConfigError("trajectory grid does not match the checkpoint grid");
  }

  const Histogram density = sample_density(trajs, density_bins);
  const std::vector<double> all_k = wavenumbers(model.grid);
  const std::vector<double> kappas(all_k.begin(), all_k.begin() + static_cast<std::ptrdiff_t>(model.mask.kept_prefix()));
  std::vector<double> us(201);
  for (std::size_t i = 0; i < us.size(); ++i) {
    us[i] = density.lo + (density.hi - density.lo) * static_cast<double>(i) / static_cast<double>(us.size() - 1);
  }

  const std::vector<std::string> names = branch_names(model);
  const std::vector<bool> active = active_branches(model, density.lo, density.hi);
  const std::optional<OperatorModel> ref = reference_model(manifest.equation, manifest.coefficient, model.grid);
  std::optional<CurveTable> ref_symbol, ref_response;
  if (ref) {
    const std::vector<bool> all(ref->branches.size(), true);
    ref_symbol = symbol_curve(*ref, kappas, branch_names(*ref), all);
    ref_response = response_curve(*ref, us, branch_names(*ref), all);
  }

  std::vector<fs::path> written;
  auto emit = [&](const char* name, const CsvTable& t) {
    write_csv(out_dir / name, t);
    written.push_back(out_dir / name);
  };
  emit("symbol_curves.csv", curve_csv(symbol_curve(model, kappas, names, active), ref_symbol));
  emit("response_curves.csv", curve_csv(response_curve(model, us, names, active), ref_response));

  CsvTable dens{{"u", "mass"}, {}};
  for (std::size_t i = 0; i < density.centers.size(); ++i) {
    dens.rows.push_back({format_double(density.centers[i]), format_double(density.mass[i])});
  }
  emit("density.csv", dens);

  const std::vector<double> spectrum = energy_spectrum(trajs);
  CsvTable spec{{"bin", "kappa", "energy"}, {}};
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    spec.rows.push_back({std::to_string(k), format_double(all_k[k]), format_double(spectrum[k])});
  }
  emit("spectrum.csv", spec);

  CsvTable branches{{"branch", "name", "realness", "parity", "conservation", "normalization", "h_offset", "active"}, {}};
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    const OperatorBranch& br = model.branches[b];
    const BranchNormalization norm = normalize_branch(br);
    branches.rows.push_back({std::to_string(b), names[b], realness_name(br.g_realness), parity_name(br.h_parity),
                             br.conservation ? "true" : "false", format_double(norm.factor), format_double(norm.offset),
                             active[b] ? "true" : "false"});
  }
  emit("branches.csv", branches);
  return written;
}

}  // namespace opreg
