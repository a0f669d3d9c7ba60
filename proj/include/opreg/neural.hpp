#pragma once

// Small dense networks with ELU hidden activations and an affine output layer,
// with hand-written reverse-mode gradients.

#include <cstdint>
#include <span>
#include <vector>

namespace opreg {

double elu(double x);
/// d elu / dx: 1 for x > 0, exp(x) otherwise.
double elu_derivative(double x);

enum class Parity { none, even, odd };

/// Gradient with respect to every parameter of an Mlp, in the Mlp's flat layout.
struct ParamGradient {
  std::vector<double> values;

  void add(const ParamGradient& other);
  void scale(double factor);
};

/// Activations recorded by a forward pass, consumed by Mlp::backward.
struct MlpTape {
  std::size_t batch = 0;
  // activations[l] is the output of layer l (index 0 holds the raw input),
  // stored feature-major: activations[l][unit * batch + b].
  std::vector<std::vector<double>> activations;
};

class Mlp {
 public:
  static std::vector<int> default_layer_sizes() { return {1, 5, 5, 1}; }

  Mlp() = default;
  /// All parameters zero.
  explicit Mlp(std::vector<int> layer_sizes);

  /// Uniform weights in [-sqrt(3/fan_in), sqrt(3/fan_in)], zero biases.
  static Mlp initialized(std::vector<int> layer_sizes, std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  std::size_t affine_layers() const { return sizes_.empty() ? 0 : sizes_.size() - 1; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  double& weight(std::size_t layer, int out, int in);
  double weight(std::size_t layer, int out, int in) const;
  double& bias(std::size_t layer, int out);
  double bias(std::size_t layer, int out) const;

  ParamGradient zero_gradient() const { return {std::vector<double>(params_.size(), 0.0)}; }

  double operator()(double x) const;
  void forward(std::span<const double> xs, std::span<double> ys) const;
  void forward(std::span<const double> xs, std::span<double> ys, MlpTape& tape) const;

  /// Accumulates parameter gradients into grad and writes the input cotangent
  /// into input_grad (if non-empty).
  void backward(const MlpTape& tape, std::span<const double> upstream, ParamGradient& grad,
                std::span<double> input_grad) const;

  /// Throws std::invalid_argument if any parameter is non-finite.
  void check_finite() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer + 1] * sizes_[layer]);
  }

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Batched evaluation.
std::vector<double> mlp_forward(const Mlp& net, std::span<const double> xs);

struct MlpVjp {
  ParamGradient params;
  std::vector<double> inputs;
};

MlpVjp mlp_vjp(const Mlp& net, std::span<const double> xs, std::span<const double> upstream);

/// sign(u) with sign(0) = 0.
inline double sign_of(double u) { return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0); }

/// Input fed to the wrapped function for a given parity: |u| or u.
inline double parity_input(Parity p, double u) { return p == Parity::none ? u : (u < 0.0 ? -u : u); }

/// Parity wrapper applied to an arbitrary scalar map f:
/// odd: sign(u) f(|u|), even: f(|u|), none: f(u).
template <typename F>
double wrap_parity(const F& f, Parity p, double u) {
  const double y = f(parity_input(p, u));
  return p == Parity::odd ? sign_of(u) * y : y;
}

}  // namespace opreg
