#include "opreg/operator.hpp"

#include <cmath>
#include <stdexcept>

namespace opreg {

double Closure::value(double x) const {
  switch (kind) {
    case Kind::zero:
      return 0.0;
    case Kind::constant:
      return coefficient;
    case Kind::identity:
      return coefficient * x;
    case Kind::square:
      return coefficient * (x * x);
    case Kind::ks_linear:
      return coefficient * (x * x - x * x * x * x);
    case Kind::ks_reduced:
      return coefficient * (x - x * x * x);
    case Kind::three_halves:
      return coefficient * std::pow(std::abs(x), 1.5);
  }
  return 0.0;
}

double Closure::derivative(double x) const {
  switch (kind) {
    case Kind::zero:
    case Kind::constant:
      return 0.0;
    case Kind::identity:
      return coefficient;
    case Kind::square:
      return 2.0 * coefficient * x;
    case Kind::ks_linear:
      return coefficient * (2.0 * x - 4.0 * x * x * x);
    case Kind::ks_reduced:
      return coefficient * (1.0 - 3.0 * x * x);
    case Kind::three_halves:
      return 1.5 * coefficient * std::sqrt(std::abs(x)) * sign_of(x);
  }
  return 0.0;
}

std::string Closure::name(Kind kind) {
  switch (kind) {
    case Kind::zero:
      return "zero";
    case Kind::constant:
      return "constant";
    case Kind::identity:
      return "identity";
    case Kind::square:
      return "square";
    case Kind::ks_linear:
      return "ks_linear";
    case Kind::ks_reduced:
      return "ks_reduced";
    case Kind::three_halves:
      return "three_halves";
  }
  return "zero";
}

Closure::Kind Closure::parse(const std::string& name) {
  for (Kind k : {Kind::zero, Kind::constant, Kind::identity, Kind::square, Kind::ks_linear, Kind::ks_reduced,
                 Kind::three_halves}) {
    if (Closure::name(k) == name) return k;
  }
  throw std::invalid_argument("unknown closure '" + name + "'");
}

// ---------------------------------------------------------------------------

double ScalarFunction::operator()(double x) const {
  if (const Mlp* net = network()) return (*net)(x);
  return closure()->value(x);
}

void ScalarFunction::forward(std::span<const double> xs, std::span<double> ys, MlpTape& tape) const {
  if (const Mlp* net = network()) {
    net->forward(xs, ys, tape);
    return;
  }
  const Closure& c = *closure();
  tape.batch = xs.size();
  tape.activations.resize(1);
  tape.activations[0].assign(xs.begin(), xs.end());
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = c.value(xs[i]);
}

void ScalarFunction::backward(const MlpTape& tape, std::span<const double> upstream, ParamGradient& grad,
                              std::span<double> input_grad) const {
  if (const Mlp* net = network()) {
    net->backward(tape, upstream, grad, input_grad);
    return;
  }
  if (input_grad.empty()) return;
  const Closure& c = *closure();
  const std::vector<double>& xs = tape.activations[0];
  for (std::size_t i = 0; i < xs.size(); ++i) input_grad[i] = c.derivative(xs[i]) * upstream[i];
}

// ---------------------------------------------------------------------------

void OperatorModel::validate() const {
  grid.validate();
  if (mask.size() != static_cast<std::size_t>(grid.half_size())) {
    throw std::invalid_argument("operator model: mask length does not match grid");
  }
  if (branches.empty()) throw std::invalid_argument("operator model needs at least one branch");
  if (!(g_input_scale > 0.0) || !std::isfinite(g_input_scale)) {
    throw std::invalid_argument("operator model: g input scale must be positive");
  }
  for (const OperatorBranch& b : branches) {
    if (const Mlp* net = b.g.network()) net->check_finite();
    if (const Mlp* net = b.h.network()) net->check_finite();
  }
}

std::size_t OperatorModel::parameter_count() const {
  std::size_t total = 0;
  for (const OperatorBranch& b : branches) total += b.g.parameter_count() + b.h.parameter_count();
  return total;
}

std::vector<double> OperatorModel::flat_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const OperatorBranch& b : branches) {
    for (const ScalarFunction* f : {&b.g, &b.h}) {
      if (const Mlp* net = f->network()) flat.insert(flat.end(), net->parameters().begin(), net->parameters().end());
    }
  }
  return flat;
}

void OperatorModel::set_flat_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("set_flat_parameters: size mismatch");
  std::size_t offset = 0;
  for (OperatorBranch& b : branches) {
    for (ScalarFunction* f : {&b.g, &b.h}) {
      if (Mlp* net = f->network()) {
        auto params = net->parameters();
        std::copy(flat.begin() + offset, flat.begin() + offset + params.size(), params.begin());
        offset += params.size();
      }
    }
  }
}

ModelGradient ModelGradient::zeros(const OperatorModel& model) {
  ModelGradient out;
  for (const OperatorBranch& b : model.branches) {
    out.g.push_back(b.g.zero_gradient());
    out.h.push_back(b.h.zero_gradient());
  }
  return out;
}

void ModelGradient::add(const ModelGradient& other) {
  if (other.g.size() != g.size()) throw std::invalid_argument("ModelGradient: shape mismatch");
  for (std::size_t b = 0; b < g.size(); ++b) {
    g[b].add(other.g[b]);
    h[b].add(other.h[b]);
  }
}

void ModelGradient::scale(double factor) {
  for (std::size_t b = 0; b < g.size(); ++b) {
    g[b].scale(factor);
    h[b].scale(factor);
  }
}

std::vector<double> ModelGradient::flatten() const {
  std::vector<double> flat;
  for (std::size_t b = 0; b < g.size(); ++b) {
    flat.insert(flat.end(), g[b].values.begin(), g[b].values.end());
    flat.insert(flat.end(), h[b].values.begin(), h[b].values.end());
  }
  return flat;
}

// ---------------------------------------------------------------------------

OperatorModel default_model(const GridConfig& grid, const std::vector<int>& layer_sizes, std::uint64_t seed,
                            double g_input_scale) {
  OperatorModel m{grid, DealiasMask::two_thirds(grid), {}, g_input_scale};
  const std::pair<Realness, Parity> combos[] = {
      {Realness::real, Parity::even},
      {Realness::real, Parity::odd},
      {Realness::imaginary, Parity::even},
      {Realness::imaginary, Parity::odd},
  };
  std::uint64_t s = seed;
  for (const auto& [realness, parity] : combos) {
    OperatorBranch b;
    b.g = Mlp::initialized(layer_sizes, s++);
    b.h = Mlp::initialized(layer_sizes, s++);
    b.h_parity = parity;
    b.g_realness = realness;
    b.conservation = true;
    m.branches.push_back(std::move(b));
  }
  m.validate();
  return m;
}

namespace {

OperatorBranch closure_branch(Closure g, Closure h, Realness realness, bool conservation) {
  OperatorBranch b;
  b.g = g;
  b.h = h;
  b.h_parity = Parity::none;
  b.g_realness = realness;
  b.conservation = conservation;
  return b;
}

}  // namespace

OperatorModel ks_exact_model(const GridConfig& grid) {
  using K = Closure::Kind;
  OperatorModel m{grid, DealiasMask::two_thirds(grid), {}, 1.0};
  m.branches.push_back(closure_branch({K::ks_linear, 1.0}, {K::identity, 1.0}, Realness::real, false));
  m.branches.push_back(closure_branch({K::identity, -0.5}, {K::square, 1.0}, Realness::imaginary, false));
  m.validate();
  return m;
}

OperatorModel ks_conservation_model(const GridConfig& grid) {
  using K = Closure::Kind;
  OperatorModel m{grid, DealiasMask::two_thirds(grid), {}, 1.0};
  m.branches.push_back(closure_branch({K::ks_reduced, 1.0}, {K::identity, 1.0}, Realness::real, true));
  m.branches.push_back(closure_branch({K::constant, -0.5}, {K::square, 1.0}, Realness::imaginary, true));
  m.validate();
  return m;
}

OperatorModel burgers_exact_model(const GridConfig& grid) {
  using K = Closure::Kind;
  OperatorModel m{grid, DealiasMask::two_thirds(grid), {}, 1.0};
  m.branches.push_back(closure_branch({K::square, -1.0}, {K::identity, 1.0}, Realness::real, false));
  m.branches.push_back(closure_branch({K::identity, -0.5}, {K::square, 1.0}, Realness::imaginary, false));
  m.validate();
  return m;
}

OperatorModel fractional_heat_exact_model(const GridConfig& grid, double nu) {
  using K = Closure::Kind;
  OperatorModel m{grid, DealiasMask::two_thirds(grid), {}, 1.0};
  m.branches.push_back(closure_branch({K::three_halves, -nu}, {K::identity, 1.0}, Realness::real, false));
  m.validate();
  return m;
}

std::vector<Complex> branch_symbol(const OperatorBranch& branch, std::span<const double> kappas,
                                   double g_input_scale) {
  std::vector<Complex> out(kappas.size());
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    const double k = kappas[i];
    if (!(k >= 0.0)) throw std::invalid_argument("branch_symbol: wavenumbers must be nonnegative");
    const double a = branch.g(branch.g.is_network() ? k * g_input_scale : k);
    const double r = branch.symbol_factor(k, a);
    out[i] = branch.g_realness == Realness::real ? Complex{r, 0.0} : Complex{0.0, r};
  }
  return out;
}

// ---------------------------------------------------------------------------

OperatorEngine::OperatorEngine(const OperatorModel& model)
    : model_(&model), fft_(real_fft_plan(model.grid.n)), kept_(model.mask.kept_prefix()) {
  model.validate();
  for (std::size_t k = kept_; k < model.mask.size(); ++k) {
    if (model.mask.keep[k]) throw std::invalid_argument("OperatorEngine: mask must keep a prefix of bins");
  }
  const std::vector<double> all = wavenumbers(model.grid);
  kappas_.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(kept_));
  g_inputs_.resize(kept_);
  for (std::size_t k = 0; k < kept_; ++k) g_inputs_[k] = kappas_[k] * model.g_input_scale;

  const std::size_t nb = model.branches.size();
  factors_.resize(nb);
  g_tapes_.resize(nb);
  std::vector<double> a(kept_);
  for (std::size_t b = 0; b < nb; ++b) {
    const OperatorBranch& br = model.branches[b];
    br.g.forward(br.g.is_network() ? std::span<const double>(g_inputs_) : std::span<const double>(kappas_), a,
                 g_tapes_[b]);
    factors_[b].resize(kept_);
    for (std::size_t k = 0; k < kept_; ++k) factors_[b][k] = br.symbol_factor(kappas_[k], a[k]);
  }
}

namespace {

// Y += g * H with g = r (real) or i r (imaginary).
inline void accumulate_symbol(Realness realness, double r, const Complex& h, Complex& y) {
  if (realness == Realness::real) {
    y = {y.real() + r * h.real(), y.imag() + r * h.imag()};
  } else {
    y = {y.real() + -r * h.imag(), y.imag() + r * h.real()};
  }
}

}  // namespace

void OperatorEngine::apply(std::span<const double> u, std::span<double> out, StepTape* tape) const {
  const OperatorModel& m = *model_;
  const std::size_t n = static_cast<std::size_t>(m.grid.n);
  if (u.size() != n || out.size() != n) throw std::invalid_argument("OperatorEngine::apply: size mismatch");
  const std::size_t nb = m.branches.size();

  thread_local std::vector<double> x, y;
  thread_local std::vector<Complex> spec, total;
  thread_local MlpTape scratch_tape;
  x.resize(n);
  y.resize(n);
  spec.resize(n / 2 + 1);
  total.assign(n / 2 + 1, Complex{0.0, 0.0});

  if (tape) {
    tape->u.assign(u.begin(), u.end());
    tape->h_tapes.resize(nb);
    tape->h_spectra.resize(nb);
  }

  for (std::size_t b = 0; b < nb; ++b) {
    const OperatorBranch& br = m.branches[b];
    for (std::size_t j = 0; j < n; ++j) x[j] = parity_input(br.h_parity, u[j]);
    br.h.forward(x, y, tape ? tape->h_tapes[b] : scratch_tape);
    if (br.h_parity == Parity::odd) {
      for (std::size_t j = 0; j < n; ++j) y[j] *= sign_of(u[j]);
    }
    fft_->forward(y, spec);
    const std::vector<double>& r = factors_[b];
    for (std::size_t k = 0; k < kept_; ++k) accumulate_symbol(br.g_realness, r[k], spec[k], total[k]);
    if (tape) tape->h_spectra[b].assign(spec.begin(), spec.begin() + static_cast<std::ptrdiff_t>(kept_));
  }
  fft_->inverse(total, out);
}

void OperatorEngine::apply_branch(std::size_t b, std::span<const double> u, std::span<double> out) const {
  const OperatorModel& m = *model_;
  const std::size_t n = static_cast<std::size_t>(m.grid.n);
  if (u.size() != n || out.size() != n) throw std::invalid_argument("OperatorEngine::apply_branch: size mismatch");
  const OperatorBranch& br = m.branches.at(b);
  std::vector<double> x(n), y(n);
  std::vector<Complex> spec(n / 2 + 1), total(n / 2 + 1);
  MlpTape tape;
  for (std::size_t j = 0; j < n; ++j) x[j] = parity_input(br.h_parity, u[j]);
  br.h.forward(x, y, tape);
  if (br.h_parity == Parity::odd) {
    for (std::size_t j = 0; j < n; ++j) y[j] *= sign_of(u[j]);
  }
  fft_->forward(y, spec);
  for (std::size_t k = 0; k < kept_; ++k) accumulate_symbol(br.g_realness, factors_[b][k], spec[k], total[k]);
  fft_->inverse(total, out);
}

GradientAccumulator OperatorEngine::make_accumulator() const {
  GradientAccumulator acc{ModelGradient::zeros(*model_), {}};
  acc.symbol_cotangents.assign(model_->branches.size(), std::vector<double>(kept_, 0.0));
  return acc;
}

void OperatorEngine::backward(const StepTape& tape, std::span<const double> upstream,
                              std::span<double> u_cotangent, GradientAccumulator& acc) const {
  const OperatorModel& m = *model_;
  const std::size_t n = static_cast<std::size_t>(m.grid.n);
  const std::size_t nb = m.branches.size();
  if (upstream.size() != n || u_cotangent.size() != n || tape.u.size() != n || tape.h_spectra.size() != nb) {
    throw std::invalid_argument("OperatorEngine::backward: shape mismatch");
  }

  thread_local std::vector<Complex> ybar, hbar_spec;
  thread_local std::vector<double> hbar, xbar;
  ybar.resize(n / 2 + 1);
  hbar_spec.assign(n / 2 + 1, Complex{0.0, 0.0});
  hbar.resize(n);
  xbar.resize(n);

  // Adjoint of the inverse transform: forward transform divided by n.
  fft_->forward(upstream, ybar);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < kept_; ++k) ybar[k] *= inv_n;

  std::fill(u_cotangent.begin(), u_cotangent.end(), 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    const OperatorBranch& br = m.branches[b];
    const std::vector<double>& r = factors_[b];
    const std::vector<Complex>& hs = tape.h_spectra[b];
    std::vector<double>& sym_cot = acc.symbol_cotangents[b];
    const bool real = br.g_realness == Realness::real;

    for (std::size_t k = 0; k < kept_; ++k) {
      const Complex yb = ybar[k];
      const Complex hk = hs[k];
      // P = conj(ybar) H; d r contributes Re(P) (real) or -Im(P) (imaginary).
      const double p_re = yb.real() * hk.real() + yb.imag() * hk.imag();
      const double p_im = yb.real() * hk.imag() - yb.imag() * hk.real();
      const double w = bin_weight(k, m.grid.n);
      const double dr = w * (real ? p_re : -p_im);
      sym_cot[k] += br.conservation ? kappas_[k] * dr : dr;
      // Hbar = conj(g) ybar.
      hbar_spec[k] = real ? Complex{r[k] * yb.real(), r[k] * yb.imag()}
                          : Complex{r[k] * yb.imag(), -r[k] * yb.real()};
    }
    // Adjoint of the forward transform: n times the inverse transform.
    fft_->inverse(hbar_spec, hbar);
    const double nn = static_cast<double>(n);
    if (br.h_parity == Parity::odd) {
      for (std::size_t j = 0; j < n; ++j) hbar[j] *= nn * sign_of(tape.u[j]);
    } else {
      for (std::size_t j = 0; j < n; ++j) hbar[j] *= nn;
    }
    br.h.backward(tape.h_tapes[b], hbar, acc.grads.h[b], xbar);
    if (br.h_parity == Parity::none) {
      for (std::size_t j = 0; j < n; ++j) u_cotangent[j] += xbar[j];
    } else {
      for (std::size_t j = 0; j < n; ++j) u_cotangent[j] += sign_of(tape.u[j]) * xbar[j];
    }
  }
}

void OperatorEngine::finalize(GradientAccumulator& acc) const {
  const OperatorModel& m = *model_;
  for (std::size_t b = 0; b < m.branches.size(); ++b) {
    const OperatorBranch& br = m.branches[b];
    if (br.g.is_network()) br.g.backward(g_tapes_[b], acc.symbol_cotangents[b], acc.grads.g[b], {});
    std::fill(acc.symbol_cotangents[b].begin(), acc.symbol_cotangents[b].end(), 0.0);
  }
}

// ---------------------------------------------------------------------------

namespace {

void check_field(const OperatorModel& model, const Field& u) {
  if (!(u.grid() == model.grid)) throw std::invalid_argument("operator: field grid does not match model grid");
}

}  // namespace

Field eval_branch(const OperatorModel& model, std::size_t branch, const Field& u) {
  check_field(model, u);
  OperatorEngine engine(model);
  Field out(model.grid);
  engine.apply_branch(branch, u.values(), out.values());
  return out;
}

Field eval_branch(const OperatorBranch& branch, const Field& u, const DealiasMask& mask, double g_input_scale) {
  OperatorModel single{u.grid(), mask, {branch}, g_input_scale};
  return eval_branch(single, 0, u);
}

Field eval_model(const OperatorModel& model, const Field& u) {
  check_field(model, u);
  OperatorEngine engine(model);
  Field out(model.grid);
  engine.apply(u.values(), out.values());
  return out;
}

ModelVjp eval_model_vjp(const OperatorModel& model, const Field& u, const Field& upstream) {
  check_field(model, u);
  check_field(model, upstream);
  OperatorEngine engine(model);
  StepTape tape;
  Field out(model.grid);
  engine.apply(u.values(), out.values(), &tape);
  GradientAccumulator acc = engine.make_accumulator();
  Field ubar(model.grid);
  engine.backward(tape, upstream.values(), ubar.values(), acc);
  engine.finalize(acc);
  return {std::move(acc.grads), std::move(ubar)};
}

}  // namespace opreg
