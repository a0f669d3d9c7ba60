#pragma once

// Learned spatial operators of the form
//   N{u} = sum_b  F^-1{ g_b(kappa) * mask * F{ h_b(u) } }
// with parity, realness and conservation-form constraints, plus exact
// reverse-mode gradients.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "opreg/neural.hpp"
#include "opreg/spectral.hpp"

namespace opreg {

enum class Realness { real, imaginary };

/// Closed-form scalar map used in place of a network (reference operators).
struct Closure {
  enum class Kind {
    zero,          // 0
    constant,      // c
    identity,      // c x
    square,        // c x^2
    ks_linear,     // c (x^2 - x^4)
    ks_reduced,    // c (x - x^3), the conservation-form KS linear factor
    three_halves,  // c |x|^(3/2)
  };

  Kind kind = Kind::zero;
  double coefficient = 1.0;

  double value(double x) const;
  double derivative(double x) const;

  static std::string name(Kind kind);
  static Kind parse(const std::string& name);

  friend bool operator==(const Closure&, const Closure&) = default;
};

/// Either a trainable network or a fixed closure.
class ScalarFunction {
 public:
  ScalarFunction() : impl_(Closure{}) {}
  ScalarFunction(Mlp net) : impl_(std::move(net)) {}          // NOLINT(google-explicit-constructor)
  ScalarFunction(Closure closure) : impl_(closure) {}         // NOLINT(google-explicit-constructor)

  bool is_network() const { return std::holds_alternative<Mlp>(impl_); }
  Mlp* network() { return std::get_if<Mlp>(&impl_); }
  const Mlp* network() const { return std::get_if<Mlp>(&impl_); }
  const Closure* closure() const { return std::get_if<Closure>(&impl_); }

  std::size_t parameter_count() const { return is_network() ? network()->parameter_count() : 0; }
  ParamGradient zero_gradient() const { return {std::vector<double>(parameter_count(), 0.0)}; }

  double operator()(double x) const;
  void forward(std::span<const double> xs, std::span<double> ys, MlpTape& tape) const;
  void backward(const MlpTape& tape, std::span<const double> upstream, ParamGradient& grad,
                std::span<double> input_grad) const;

  friend bool operator==(const ScalarFunction&, const ScalarFunction&) = default;

 private:
  std::variant<Mlp, Closure> impl_;
};

struct OperatorBranch {
  ScalarFunction g;  // input kappa (optionally pre-scaled), output real a(kappa)
  ScalarFunction h;  // input u (or |u|), output real
  Parity h_parity = Parity::none;
  Realness g_realness = Realness::real;
  bool conservation = false;

  /// Real factor r with symbol r (real) or i r (imaginary), given a = g(kappa).
  double symbol_factor(double kappa, double a) const { return conservation ? kappa * a : a; }
  double wrapped_h(double u) const { return wrap_parity(h, h_parity, u); }

  friend bool operator==(const OperatorBranch&, const OperatorBranch&) = default;
};

struct OperatorModel {
  GridConfig grid;
  DealiasMask mask;
  std::vector<OperatorBranch> branches;
  /// Fixed multiplier applied to kappa before it enters a g network.
  double g_input_scale = 1.0;

  void validate() const;
  std::size_t parameter_count() const;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> flat);
};

struct ModelGradient {
  std::vector<ParamGradient> g;
  std::vector<ParamGradient> h;

  static ModelGradient zeros(const OperatorModel& model);
  void add(const ModelGradient& other);
  void scale(double factor);
  std::vector<double> flatten() const;
};

/// The four conservation-form branches (real/even, real/odd, imaginary/even,
/// imaginary/odd) with freshly initialized networks.
OperatorModel default_model(const GridConfig& grid, const std::vector<int>& layer_sizes, std::uint64_t seed,
                            double g_input_scale = 1.0);

/// Exact closures reproducing the reference right-hand sides.
OperatorModel ks_exact_model(const GridConfig& grid);
/// Same operator written in conservation form: g = kappa (kappa - kappa^3), g = i kappa (-1/2).
OperatorModel ks_conservation_model(const GridConfig& grid);
OperatorModel burgers_exact_model(const GridConfig& grid);
OperatorModel fractional_heat_exact_model(const GridConfig& grid, double nu);

/// g(kappa) for each entry of kappas (which must be nonnegative).
std::vector<Complex> branch_symbol(const OperatorBranch& branch, std::span<const double> kappas,
                                   double g_input_scale = 1.0);

/// Forward record of one operator application, used by the reverse sweep.
struct StepTape {
  std::vector<double> u;
  std::vector<MlpTape> h_tapes;
  std::vector<std::vector<Complex>> h_spectra;  // masked F{h(u)} on kept bins
};

/// Accumulates gradients across many operator applications. The g networks
/// are backpropagated once, in OperatorEngine::finalize.
struct GradientAccumulator {
  ModelGradient grads;
  std::vector<std::vector<double>> symbol_cotangents;  // per branch, per kept bin
};

/// Binds a model snapshot and caches everything that does not depend on u.
class OperatorEngine {
 public:
  explicit OperatorEngine(const OperatorModel& model);

  const OperatorModel& model() const { return *model_; }
  std::size_t kept_bins() const { return kept_; }
  /// Real symbol factor r_k of branch b; the symbol is r_k or i r_k by realness.
  std::span<const double> symbol_factors(std::size_t b) const { return factors_[b]; }

  void apply(std::span<const double> u, std::span<double> out, StepTape* tape = nullptr) const;
  void apply_branch(std::size_t b, std::span<const double> u, std::span<double> out) const;

  GradientAccumulator make_accumulator() const;
  /// Reverse sweep of one apply(): parameter gradients are accumulated,
  /// u_cotangent is overwritten with (dN/du)^T upstream.
  void backward(const StepTape& tape, std::span<const double> upstream, std::span<double> u_cotangent,
                GradientAccumulator& acc) const;
  /// Pushes accumulated symbol cotangents through the g networks.
  void finalize(GradientAccumulator& acc) const;

 private:
  const OperatorModel* model_;
  std::shared_ptr<const RealFft> fft_;
  std::size_t kept_;
  std::vector<double> kappas_;                 // kept bins
  std::vector<double> g_inputs_;               // network inputs for kept bins
  std::vector<std::vector<double>> factors_;   // per branch r_k
  std::vector<MlpTape> g_tapes_;
};

Field eval_branch(const OperatorModel& model, std::size_t branch, const Field& u);
Field eval_branch(const OperatorBranch& branch, const Field& u, const DealiasMask& mask,
                  double g_input_scale = 1.0);
Field eval_model(const OperatorModel& model, const Field& u);

struct ModelVjp {
  ModelGradient params;
  Field u;
};

ModelVjp eval_model_vjp(const OperatorModel& model, const Field& u, const Field& upstream);

}  // namespace opreg
