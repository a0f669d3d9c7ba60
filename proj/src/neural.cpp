#include "opreg/neural.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace opreg {

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

double elu_derivative(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

void ParamGradient::add(const ParamGradient& other) {
  if (other.values.size() != values.size()) throw std::invalid_argument("ParamGradient: shape mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
}

void ParamGradient::scale(double factor) {
  for (double& v : values) v *= factor;
}

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
  if (sizes_.front() != 1 || sizes_.back() != 1) {
    throw std::invalid_argument("Mlp maps scalars to scalars: first and last layer sizes must be 1");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw std::invalid_argument("Mlp layer sizes must be positive");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l + 1] * (sizes_[l] + 1));
  }
  params_.assign(total, 0.0);
}

Mlp Mlp::initialized(std::vector<int> layer_sizes, std::uint64_t seed) {
  Mlp net(std::move(layer_sizes));
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.affine_layers(); ++l) {
    const int fan_in = net.sizes_[l];
    const double bound = std::sqrt(3.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int o = 0; o < net.sizes_[l + 1]; ++o) {
      for (int i = 0; i < fan_in; ++i) net.weight(l, o, i) = dist(rng);
    }
  }
  return net;
}

double& Mlp::weight(std::size_t layer, int out, int in) {
  return params_[weight_offset(layer) + static_cast<std::size_t>(out * sizes_[layer] + in)];
}

double Mlp::weight(std::size_t layer, int out, int in) const {
  return params_[weight_offset(layer) + static_cast<std::size_t>(out * sizes_[layer] + in)];
}

double& Mlp::bias(std::size_t layer, int out) { return params_[bias_offset(layer) + out]; }

double Mlp::bias(std::size_t layer, int out) const { return params_[bias_offset(layer) + out]; }

void Mlp::check_finite() const {
  for (double p : params_) {
    if (!std::isfinite(p)) throw std::invalid_argument("Mlp has non-finite parameters");
  }
}

double Mlp::operator()(double x) const {
  double y = 0.0;
  forward(std::span<const double>(&x, 1), std::span<double>(&y, 1));
  return y;
}

void Mlp::forward(std::span<const double> xs, std::span<double> ys) const {
  thread_local MlpTape tape;
  forward(xs, ys, tape);
}

void Mlp::forward(std::span<const double> xs, std::span<double> ys, MlpTape& tape) const {
  if (xs.size() != ys.size()) throw std::invalid_argument("Mlp::forward: batch size mismatch");
  const std::size_t batch = xs.size();
  const std::size_t layers = affine_layers();
  tape.batch = batch;
  tape.activations.resize(layers + 1);
  tape.activations[0].assign(xs.begin(), xs.end());

  for (std::size_t l = 0; l < layers; ++l) {
    const int in_w = sizes_[l];
    const int out_w = sizes_[l + 1];
    const bool hidden = l + 1 < layers;
    const std::vector<double>& prev = tape.activations[l];
    std::vector<double>& next = tape.activations[l + 1];
    next.resize(static_cast<std::size_t>(out_w) * batch);
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    for (int o = 0; o < out_w; ++o) {
      double* z = next.data() + static_cast<std::size_t>(o) * batch;
      for (std::size_t s = 0; s < batch; ++s) z[s] = b[o];
      for (int i = 0; i < in_w; ++i) {
        const double wi = w[o * in_w + i];
        const double* a = prev.data() + static_cast<std::size_t>(i) * batch;
        for (std::size_t s = 0; s < batch; ++s) z[s] += wi * a[s];
      }
      if (hidden) {
        for (std::size_t s = 0; s < batch; ++s) z[s] = elu(z[s]);
      }
    }
  }
  const std::vector<double>& out = tape.activations[layers];
  for (std::size_t s = 0; s < batch; ++s) ys[s] = out[s];
}

void Mlp::backward(const MlpTape& tape, std::span<const double> upstream, ParamGradient& grad,
                   std::span<double> input_grad) const {
  const std::size_t batch = tape.batch;
  const std::size_t layers = affine_layers();
  if (upstream.size() != batch || tape.activations.size() != layers + 1) {
    throw std::invalid_argument("Mlp::backward: shape mismatch with forward pass");
  }
  if (grad.values.size() != params_.size()) throw std::invalid_argument("Mlp::backward: gradient shape mismatch");
  if (!input_grad.empty() && input_grad.size() != batch) {
    throw std::invalid_argument("Mlp::backward: input gradient size mismatch");
  }

  thread_local std::vector<double> delta;
  thread_local std::vector<double> delta_prev;
  delta.assign(upstream.begin(), upstream.end());

  for (std::size_t l = layers; l-- > 0;) {
    const int in_w = sizes_[l];
    const int out_w = sizes_[l + 1];
    const std::vector<double>& prev = tape.activations[l];
    const double* w = params_.data() + weight_offset(l);
    double* gw = grad.values.data() + weight_offset(l);
    double* gb = grad.values.data() + bias_offset(l);

    for (int o = 0; o < out_w; ++o) {
      const double* d = delta.data() + static_cast<std::size_t>(o) * batch;
      double sb = 0.0;
      for (std::size_t s = 0; s < batch; ++s) sb += d[s];
      gb[o] += sb;
      for (int i = 0; i < in_w; ++i) {
        const double* a = prev.data() + static_cast<std::size_t>(i) * batch;
        double sw = 0.0;
        for (std::size_t s = 0; s < batch; ++s) sw += d[s] * a[s];
        gw[o * in_w + i] += sw;
      }
    }

    if (l == 0 && input_grad.empty()) break;

    delta_prev.assign(static_cast<std::size_t>(in_w) * batch, 0.0);
    for (int o = 0; o < out_w; ++o) {
      const double* d = delta.data() + static_cast<std::size_t>(o) * batch;
      for (int i = 0; i < in_w; ++i) {
        const double wi = w[o * in_w + i];
        double* dp = delta_prev.data() + static_cast<std::size_t>(i) * batch;
        for (std::size_t s = 0; s < batch; ++s) dp[s] += wi * d[s];
      }
    }
    if (l > 0) {
      // prev holds elu(z); elu'(z) = 1 where elu(z) > 0, else elu(z) + 1 = exp(z).
      for (std::size_t idx = 0; idx < delta_prev.size(); ++idx) {
        const double a = prev[idx];
        if (a <= 0.0) delta_prev[idx] *= a + 1.0;
      }
    }
    delta.swap(delta_prev);
  }

  if (!input_grad.empty()) {
    for (std::size_t s = 0; s < batch; ++s) input_grad[s] = delta[s];
  }
}

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> xs) {
  net.check_finite();
  std::vector<double> ys(xs.size());
  net.forward(xs, ys);
  return ys;
}

MlpVjp mlp_vjp(const Mlp& net, std::span<const double> xs, std::span<const double> upstream) {
  if (xs.size() != upstream.size()) throw std::invalid_argument("mlp_vjp: shape mismatch");
  MlpTape tape;
  std::vector<double> ys(xs.size());
  net.forward(xs, ys, tape);
  MlpVjp out{net.zero_gradient(), std::vector<double>(xs.size(), 0.0)};
  net.backward(tape, upstream, out.params, out.inputs);
  return out;
}

}  // namespace opreg
