#include "opreg/dynamics.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "opreg/errors.hpp"

namespace opreg {

void Trajectory::validate() const {
  grid.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("trajectory dt must be positive");
  if (save_stride < 1) throw std::invalid_argument("trajectory save stride must be >= 1");
  if (snapshots.empty()) throw std::invalid_argument("trajectory has no snapshots");
  for (const Field& f : snapshots) {
    if (!(f.grid() == grid)) throw std::invalid_argument("trajectory snapshot grid mismatch");
  }
}

const char* equation_name(EquationKind kind) {
  switch (kind) {
    case EquationKind::fractional_heat:
      return "fractional_heat";
    case EquationKind::ks:
      return "ks";
    case EquationKind::burgers:
      return "burgers";
    case EquationKind::learned:
      return "learned";
  }
  return "unknown";
}

EquationKind parse_equation(const std::string& name) {
  for (EquationKind k :
       {EquationKind::fractional_heat, EquationKind::ks, EquationKind::burgers, EquationKind::learned}) {
    if (name == equation_name(k)) return k;
  }
  throw std::invalid_argument("unknown equation kind '" + name + "'");
}

void RhsSpec::validate() const {
  if ((kind == EquationKind::learned) != static_cast<bool>(model)) {
    throw std::invalid_argument("RhsSpec: a model is required exactly when kind is learned");
  }
  if (kind == EquationKind::fractional_heat && !(coefficient > 0.0)) {
    throw std::invalid_argument("fractional heat coefficient must be positive");
  }
}

// ---------------------------------------------------------------------------

RhsEvaluator::RhsEvaluator(const RhsSpec& spec, const GridConfig& grid)
    : spec_(spec), grid_(grid), fft_(real_fft_plan(grid.n)), kept_(static_cast<std::size_t>(grid.cutoff_bin()) + 1) {
  spec_.validate();
  grid_.validate();
  kappas_ = wavenumbers(grid_);
  if (spec_.kind == EquationKind::learned) {
    if (!(spec_.model->grid == grid_)) throw std::invalid_argument("learned model grid does not match field grid");
    engine_ = std::make_unique<OperatorEngine>(*spec_.model);
  }
}

void RhsEvaluator::operator()(std::span<const double> u, std::span<double> out) const {
  const std::size_t n = static_cast<std::size_t>(grid_.n);
  if (u.size() != n || out.size() != n) throw std::invalid_argument("RhsEvaluator: size mismatch");
  if (engine_) {
    engine_->apply(u, out);
    return;
  }

  thread_local std::vector<double> sq;
  thread_local std::vector<Complex> lin_spec, sq_spec, total;
  lin_spec.resize(n / 2 + 1);
  total.assign(n / 2 + 1, Complex{0.0, 0.0});
  fft_->forward(u, lin_spec);

  if (spec_.kind == EquationKind::fractional_heat) {
    const double nu = spec_.coefficient;
    for (std::size_t k = 0; k < kept_; ++k) {
      const double s = -nu * std::pow(std::abs(kappas_[k]), 1.5);
      total[k] = {total[k].real() + s * lin_spec[k].real(), total[k].imag() + s * lin_spec[k].imag()};
    }
    fft_->inverse(total, out);
    return;
  }

  sq.resize(n);
  sq_spec.resize(n / 2 + 1);
  for (std::size_t j = 0; j < n; ++j) sq[j] = u[j] * u[j];
  fft_->forward(sq, sq_spec);
  const bool ks = spec_.kind == EquationKind::ks;
  for (std::size_t k = 0; k < kept_; ++k) {
    const double kk = kappas_[k];
    const double lin = ks ? kk * kk - kk * kk * kk * kk : -(kk * kk);
    const double conv = -0.5 * kk;
    total[k] = {total[k].real() + lin * lin_spec[k].real(), total[k].imag() + lin * lin_spec[k].imag()};
    total[k] = {total[k].real() + -conv * sq_spec[k].imag(), total[k].imag() + conv * sq_spec[k].real()};
  }
  fft_->inverse(total, out);
}

Field evaluate_rhs(const RhsSpec& rhs, const Field& u) {
  RhsEvaluator eval(rhs, u.grid());
  Field out(u.grid());
  eval(u.values(), out.values());
  return out;
}

Field fractional_heat_rhs(const Field& u, double nu) { return evaluate_rhs(RhsSpec::fractional_heat(nu), u); }

Field ks_rhs(const Field& u) { return evaluate_rhs(RhsSpec::ks(), u); }

Field burgers_rhs(const Field& u) { return evaluate_rhs(RhsSpec::burgers(), u); }

// ---------------------------------------------------------------------------

namespace {

bool step_in_place(const RhsEvaluator& eval, std::vector<double>& u, std::vector<double>& rate, double dt) {
  eval(u, rate);
  bool finite = true;
  for (std::size_t j = 0; j < u.size(); ++j) {
    u[j] = u[j] + dt * rate[j];
    if (!std::isfinite(u[j])) finite = false;
  }
  return finite;
}

void check_dt(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("time step must be positive");
}

}  // namespace

Field euler_step(const RhsSpec& rhs, const Field& u, double dt) {
  check_dt(dt);
  RhsEvaluator eval(rhs, u.grid());
  std::vector<double> state(u.values().begin(), u.values().end());
  std::vector<double> rate(state.size());
  if (!step_in_place(eval, state, rate, dt)) throw BlowUpError(0, "euler_step produced a non-finite state");
  return Field(u.grid(), std::move(state));
}

Field filtered_noise_ic(const GridConfig& grid, double kappa_cut, double amplitude, std::uint64_t seed) {
  grid.validate();
  const std::vector<double> kappas = wavenumbers(grid);
  const double band_max = kappas[static_cast<std::size_t>(grid.cutoff_bin())];
  if (!(kappa_cut >= kappas[1]) || kappa_cut > band_max) {
    throw std::invalid_argument("filtered_noise_ic: kappa_cut must lie within the resolved band [" +
                                std::to_string(kappas[1]) + ", " + std::to_string(band_max) + "]");
  }
  if (!(amplitude > 0.0)) throw std::invalid_argument("filtered_noise_ic: amplitude must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Field noise(grid);
  for (double& v : noise.values()) v = normal(rng);

  HalfSpectrum s = forward_dft(noise);
  s[0] = Complex{0.0, 0.0};
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (kappas[k] > kappa_cut) s[k] = Complex{0.0, 0.0};
  }
  Field u = inverse_dft(s);
  double sum_sq = 0.0;
  for (double v : u.values()) sum_sq += v * v;
  const double rms = std::sqrt(sum_sq / grid.n);
  const double scale = amplitude / rms;
  for (double& v : u.values()) v *= scale;
  return u;
}

Trajectory simulate(const RhsSpec& rhs, const Field& u0, double dt, std::size_t steps, int save_stride,
                    double t0) {
  check_dt(dt);
  if (steps < 1) throw std::invalid_argument("simulate: steps must be >= 1");
  if (save_stride < 1) throw std::invalid_argument("simulate: save stride must be >= 1");
  RhsEvaluator eval(rhs, u0.grid());

  Trajectory traj{u0.grid(), dt, save_stride, t0, {}};
  traj.snapshots.reserve(steps / static_cast<std::size_t>(save_stride) + 1);
  traj.snapshots.push_back(u0);
  std::vector<double> state(u0.values().begin(), u0.values().end());
  std::vector<double> rate(state.size());
  for (std::size_t step = 1; step <= steps; ++step) {
    if (!step_in_place(eval, state, rate, dt)) throw BlowUpError(step, "simulation produced a non-finite state");
    if (step % static_cast<std::size_t>(save_stride) == 0) traj.snapshots.emplace_back(u0.grid(), state);
  }
  return traj;
}

Field advance(const RhsSpec& rhs, const Field& u0, double dt, std::size_t steps) {
  check_dt(dt);
  RhsEvaluator eval(rhs, u0.grid());
  std::vector<double> state(u0.values().begin(), u0.values().end());
  std::vector<double> rate(state.size());
  for (std::size_t step = 1; step <= steps; ++step) {
    if (!step_in_place(eval, state, rate, dt)) throw BlowUpError(step, "spin-up produced a non-finite state");
  }
  return Field(u0.grid(), std::move(state));
}

double linear_stability_limit(EquationKind kind, double coefficient, const GridConfig& grid) {
  const std::vector<double> kappas = wavenumbers(grid);
  double worst = 0.0;
  for (int k = 0; k <= grid.cutoff_bin(); ++k) {
    const double kk = kappas[static_cast<std::size_t>(k)];
    double lambda = 0.0;
    switch (kind) {
      case EquationKind::fractional_heat:
        lambda = -coefficient * std::pow(kk, 1.5);
        break;
      case EquationKind::ks:
        lambda = kk * kk - kk * kk * kk * kk;
        break;
      case EquationKind::burgers:
        lambda = -kk * kk;
        break;
      case EquationKind::learned:
        return std::numeric_limits<double>::infinity();
    }
    if (lambda < 0.0) worst = std::max(worst, -lambda);
  }
  return worst > 0.0 ? 2.0 / worst : std::numeric_limits<double>::infinity();
}

double spatial_mean(const Field& u) {
  double acc = 0.0;
  for (double v : u.values()) acc += v;
  return acc / static_cast<double>(u.size());
}

}  // namespace opreg
