#pragma once

// Reference right-hand sides, the explicit Euler stepper, filtered-noise
// initial conditions and trajectory recording.

#include <cstdint>
#include <memory>
#include <vector>

#include "opreg/operator.hpp"
#include "opreg/spectral.hpp"

namespace opreg {

struct Trajectory {
  GridConfig grid;
  double dt = 0.0;
  int save_stride = 1;
  double t0 = 0.0;
  std::vector<Field> snapshots;

  /// Spacing in time between consecutive stored snapshots.
  double snapshot_spacing() const { return dt * save_stride; }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) * snapshot_spacing(); }
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

enum class EquationKind { fractional_heat, ks, burgers, learned };

const char* equation_name(EquationKind kind);
EquationKind parse_equation(const std::string& name);

struct RhsSpec {
  EquationKind kind = EquationKind::ks;
  double coefficient = 0.0;  // nu for the fractional heat equation
  std::shared_ptr<const OperatorModel> model;  // present iff kind == learned

  static RhsSpec fractional_heat(double nu) { return {EquationKind::fractional_heat, nu, nullptr}; }
  static RhsSpec ks() { return {EquationKind::ks, 0.0, nullptr}; }
  static RhsSpec burgers() { return {EquationKind::burgers, 0.0, nullptr}; }
  static RhsSpec learned(std::shared_ptr<const OperatorModel> model) {
    return {EquationKind::learned, 0.0, std::move(model)};
  }

  void validate() const;
};

/// -nu |kappa|^{3/2} applied to the dealiased spectrum of u.
Field fractional_heat_rhs(const Field& u, double nu);
/// (kappa^2 - kappa^4) F{u} - (i kappa / 2) F{u^2}, both dealiased.
Field ks_rhs(const Field& u);
/// -kappa^2 F{u} - (i kappa / 2) F{u^2}, both dealiased.
Field burgers_rhs(const Field& u);

/// Evaluates any RHS repeatedly on one grid without re-planning.
class RhsEvaluator {
 public:
  RhsEvaluator(const RhsSpec& spec, const GridConfig& grid);
  void operator()(std::span<const double> u, std::span<double> out) const;

 private:
  RhsSpec spec_;
  GridConfig grid_;
  std::shared_ptr<const RealFft> fft_;
  std::vector<double> kappas_;
  std::size_t kept_;
  std::unique_ptr<OperatorEngine> engine_;
};

Field evaluate_rhs(const RhsSpec& rhs, const Field& u);

/// u + dt * rhs(u). Throws BlowUpError (step 0) on a non-finite result.
Field euler_step(const RhsSpec& rhs, const Field& u, double dt);

/// Seeded white noise, low-pass filtered to kappa <= kappa_cut with the mean
/// removed, rescaled to the given root-mean-square amplitude.
Field filtered_noise_ic(const GridConfig& grid, double kappa_cut, double amplitude, std::uint64_t seed);

/// Records u0 and every save_stride-th state over `steps` Euler steps.
Trajectory simulate(const RhsSpec& rhs, const Field& u0, double dt, std::size_t steps, int save_stride,
                    double t0 = 0.0);

/// Advances without recording (spin-up); returns the final state.
Field advance(const RhsSpec& rhs, const Field& u0, double dt, std::size_t steps);

/// Explicit Euler stability limit 2 / max_k |lambda_k| of the linear part of
/// a reference equation on the dealiased band. Infinite if the linear part is zero.
double linear_stability_limit(EquationKind kind, double coefficient, const GridConfig& grid);

double spatial_mean(const Field& u);

}  // namespace opreg
