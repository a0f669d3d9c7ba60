#include "opreg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace opreg {

BranchNormalization normalize_branch(const OperatorBranch& branch) {
  const double offset = branch.conservation ? branch.wrapped_h(0.0) : 0.0;
  const double c = simpson([&](double u) { return branch.wrapped_h(u) - offset; }, 0.0, 1.0, 1001);
  return {c, offset, !(std::abs(c) >= kDegenerateIntegral)};
}

void CurveTable::add_column(std::string label, std::vector<double> values) {
  if (values.size() != abscissa.size()) throw std::invalid_argument("CurveTable: column length mismatch");
  if (std::find(labels.begin(), labels.end(), label) != labels.end()) {
    throw std::invalid_argument("CurveTable: duplicate label '" + label + "'");
  }
  labels.push_back(std::move(label));
  columns.push_back(std::move(values));
}

const std::vector<double>& CurveTable::column(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw std::out_of_range("CurveTable: no column '" + label + "'");
  return columns[static_cast<std::size_t>(it - labels.begin())];
}

std::vector<std::string> branch_names(const OperatorModel& model) {
  std::vector<std::string> names;
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    const OperatorBranch& br = model.branches[b];
    std::string name = br.g_realness == Realness::real ? "real" : "imag";
    name += br.h_parity == Parity::even ? "_even" : (br.h_parity == Parity::odd ? "_odd" : "_none");
    if (std::count(names.begin(), names.end(), name) > 0 ||
        std::any_of(model.branches.begin() + static_cast<std::ptrdiff_t>(b) + 1, model.branches.end(),
                    [&](const OperatorBranch& o) {
                      return o.g_realness == br.g_realness && o.h_parity == br.h_parity;
                    })) {
      name += "_" + std::to_string(b);
    }
    names.push_back(name);
  }
  return names;
}

namespace {

void check_names(const OperatorModel& model, const std::vector<std::string>& names, const std::vector<bool>& include) {
  if (names.size() != model.branches.size() || include.size() != model.branches.size()) {
    throw std::invalid_argument("curve: names/include must have one entry per branch");
  }
}

}  // namespace

CurveTable symbol_curve(const OperatorModel& model, const std::vector<double>& kappas,
                        const std::vector<std::string>& names, const std::vector<bool>& include) {
  check_names(model, names, include);
  CurveTable table{"kappa", kappas, {}, {}};
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    if (!include[b]) continue;
    const OperatorBranch& br = model.branches[b];
    const BranchNormalization norm = normalize_branch(br);
    if (norm.degenerate) continue;
    const std::vector<Complex> g = branch_symbol(br, kappas, model.g_input_scale);
    std::vector<double> re(g.size()), im(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      re[i] = norm.factor * g[i].real();
      im[i] = norm.factor * g[i].imag();
    }
    table.add_column(names[b] + "_re", std::move(re));
    table.add_column(names[b] + "_im", std::move(im));
  }
  return table;
}

CurveTable response_curve(const OperatorModel& model, const std::vector<double>& us,
                          const std::vector<std::string>& names, const std::vector<bool>& include) {
  check_names(model, names, include);
  CurveTable table{"u", us, {}, {}};
  for (std::size_t b = 0; b < model.branches.size(); ++b) {
    if (!include[b]) continue;
    const OperatorBranch& br = model.branches[b];
    const BranchNormalization norm = normalize_branch(br);
    if (norm.degenerate) continue;
    std::vector<double> h(us.size());
    for (std::size_t i = 0; i < us.size(); ++i) h[i] = (br.wrapped_h(us[i]) - norm.offset) / norm.factor;
    table.add_column(names[b], std::move(h));
  }
  return table;
}

std::vector<bool> active_branches(const OperatorModel& model, double u_min, double u_max) {
  const std::vector<double> all = wavenumbers(model.grid);
  const std::vector<double> kept(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(model.mask.kept_prefix()));
  constexpr int samples = 201;
  std::vector<double> products;
  std::vector<bool> integral_ok;
  for (const OperatorBranch& br : model.branches) {
    double h_max = 0.0;
    for (int i = 0; i < samples; ++i) {
      const double u = u_min + (u_max - u_min) * i / (samples - 1);
      h_max = std::max(h_max, std::abs(br.wrapped_h(u)));
    }
    double g_max = 0.0;
    for (const Complex& g : branch_symbol(br, kept, model.g_input_scale)) g_max = std::max(g_max, std::abs(g));
    products.push_back(h_max * g_max);
    integral_ok.push_back(!normalize_branch(br).degenerate);
  }
  const double largest = *std::max_element(products.begin(), products.end());
  std::vector<bool> active(products.size());
  for (std::size_t b = 0; b < products.size(); ++b) {
    active[b] = integral_ok[b] && largest > 0.0 && products[b] >= 1e-3 * largest;
  }
  return active;
}

Histogram sample_density(const std::vector<Trajectory>& trajectories, int bins) {
  if (bins < 2) throw std::invalid_argument("sample_density: bins must be >= 2");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (const Trajectory& t : trajectories) {
    for (const Field& f : t.snapshots) {
      for (double v : f.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        ++count;
      }
    }
  }
  if (count == 0) throw std::invalid_argument("sample_density: no samples");
  if (!(hi > lo)) {
    // Degenerate range: center the bins on the single observed value.
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h{lo, hi, std::vector<double>(static_cast<std::size_t>(bins)), std::vector<double>(static_cast<std::size_t>(bins), 0.0)};
  const double width = (hi - lo) / bins;
  for (int i = 0; i < bins; ++i) h.centers[static_cast<std::size_t>(i)] = lo + (i + 0.5) * width;
  const double unit = 1.0 / static_cast<double>(count);
  for (const Trajectory& t : trajectories) {
    for (const Field& f : t.snapshots) {
      for (double v : f.values()) {
        auto idx = static_cast<long>(std::floor((v - lo) / width));
        idx = std::clamp(idx, 0L, static_cast<long>(bins) - 1);
        h.mass[static_cast<std::size_t>(idx)] += unit;
      }
    }
  }
  return h;
}

std::vector<double> energy_spectrum(const Field& u) {
  const HalfSpectrum s = forward_dft(u);
  const double n2 = static_cast<double>(u.grid().n) * static_cast<double>(u.grid().n);
  std::vector<double> e(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) e[k] = bin_weight(k, u.grid().n) * std::norm(s[k]) / n2;
  return e;
}

std::vector<double> energy_spectrum(const std::vector<Trajectory>& trajectories) {
  std::vector<double> acc;
  std::size_t count = 0;
  for (const Trajectory& t : trajectories) {
    for (const Field& f : t.snapshots) {
      const std::vector<double> e = energy_spectrum(f);
      if (acc.empty()) acc.assign(e.size(), 0.0);
      if (e.size() != acc.size()) throw std::invalid_argument("energy_spectrum: mixed grids");
      for (std::size_t k = 0; k < e.size(); ++k) acc[k] += e[k];
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("energy_spectrum: no snapshots");
  for (double& v : acc) v /= static_cast<double>(count);
  return acc;
}

ErrorReport compare_solutions(const Trajectory& ref, const Trajectory& test,
                              const std::vector<std::size_t>& spectrum_snapshots) {
  if (!(ref.grid == test.grid)) throw std::invalid_argument("compare_solutions: grid mismatch");
  if (ref.snapshots.size() != test.snapshots.size() || ref.t0 != test.t0 ||
      ref.snapshot_spacing() != test.snapshot_spacing()) {
    throw std::invalid_argument("compare_solutions: trajectories are not sampled at the same times");
  }
  ErrorReport report;
  for (std::size_t i = 0; i < ref.snapshots.size(); ++i) {
    double diff = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < ref.snapshots[i].size(); ++j) {
      const double d = test.snapshots[i][j] - ref.snapshots[i][j];
      diff += d * d;
      norm += ref.snapshots[i][j] * ref.snapshots[i][j];
    }
    double rel = 0.0;
    if (norm > 0.0) {
      rel = std::sqrt(diff / norm);
    } else if (diff > 0.0) {
      rel = std::numeric_limits<double>::infinity();
    }
    report.times.push_back(ref.time(i));
    report.relative_l2.push_back(rel);
  }
  for (std::size_t idx : spectrum_snapshots) {
    if (idx >= ref.snapshots.size()) throw std::out_of_range("compare_solutions: spectrum snapshot out of range");
    const std::vector<double> er = energy_spectrum(ref.snapshots[idx]);
    const std::vector<double> et = energy_spectrum(test.snapshots[idx]);
    std::vector<double> ratio(er.size());
    for (std::size_t k = 0; k < er.size(); ++k) {
      if (er[k] > 0.0) {
        ratio[k] = et[k] / er[k];
      } else {
        ratio[k] = et[k] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      }
    }
    report.spectrum_times.push_back(ref.time(idx));
    report.spectrum_ratio.push_back(std::move(ratio));
  }
  return report;
}

}  // namespace opreg
