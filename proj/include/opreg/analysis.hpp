#pragma once

// Post-training diagnostics: branch normalization, symbol/response curves,
// sample density, energy spectra and trajectory comparison.

#include <optional>
#include <string>
#include <vector>

#include "opreg/dynamics.hpp"
#include "opreg/operator.hpp"

namespace opreg {

/// Composite Simpson rule on [a, b] with an odd number of nodes.
template <typename F>
double simpson(const F& f, double a, double b, int nodes = 1001) {
  const int intervals = nodes - 1;
  const double h = (b - a) / intervals;
  double acc = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

struct BranchNormalization {
  /// c = integral_0^1 (h(u) - offset) du; h is reported as (h - offset) / c and g as c g.
  /// In conservation form the symbol vanishes at kappa = 0, so a constant in h
  /// is invisible to the operator; offset = h(0) pins it there.
  double factor = 0.0;
  double offset = 0.0;
  bool degenerate = false;
};

inline constexpr double kDegenerateIntegral = 1e-8;

BranchNormalization normalize_branch(const OperatorBranch& branch);

struct CurveTable {
  std::string abscissa_label;
  std::vector<double> abscissa;
  std::vector<std::string> labels;
  std::vector<std::vector<double>> columns;

  void add_column(std::string label, std::vector<double> values);
  const std::vector<double>& column(const std::string& label) const;
};

/// Normalized symbol of each non-degenerate branch: columns "<name>_re", "<name>_im".
CurveTable symbol_curve(const OperatorModel& model, const std::vector<double>& kappas,
                        const std::vector<std::string>& names, const std::vector<bool>& include);
/// Normalized parity-wrapped h of each non-degenerate branch.
CurveTable response_curve(const OperatorModel& model, const std::vector<double>& us,
                          const std::vector<std::string>& names, const std::vector<bool>& include);

/// Branches whose max|h| x max|g| falls below 1e-3 of the largest branch's are
/// flagged degenerate, as are branches with a near-zero normalization integral.
std::vector<bool> active_branches(const OperatorModel& model, double u_min, double u_max);

/// Conventional display names: "real_even", "imag_odd", ...
std::vector<std::string> branch_names(const OperatorModel& model);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> centers;
  std::vector<double> mass;  // sums to 1
};

Histogram sample_density(const std::vector<Trajectory>& trajectories, int bins = 101);

/// Mean over snapshots of w_k |F{u}_k|^2 / n^2.
std::vector<double> energy_spectrum(const std::vector<Trajectory>& trajectories);
std::vector<double> energy_spectrum(const Field& u);

struct ErrorReport {
  std::vector<double> times;
  std::vector<double> relative_l2;
  std::vector<double> spectrum_times;
  std::vector<std::vector<double>> spectrum_ratio;  // per selected time, per bin
};

/// Relative L2 error per snapshot; spectrum ratios test/ref at the selected
/// snapshot indices (bins where the reference energy is zero report 0 when the
/// test energy is also zero, +inf otherwise).
ErrorReport compare_solutions(const Trajectory& ref, const Trajectory& test,
                              const std::vector<std::size_t>& spectrum_snapshots = {});

}  // namespace opreg
