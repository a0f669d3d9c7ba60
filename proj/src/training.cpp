#include "opreg/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "opreg/errors.hpp"

namespace opreg {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (iterations_per_stage < 0) throw std::invalid_argument("iterations per stage must be >= 0");
  if (p_schedule.empty()) throw std::invalid_argument("p schedule must not be empty");
  for (std::size_t i = 0; i < p_schedule.size(); ++i) {
    if (p_schedule[i] < 1) throw std::invalid_argument("p values must be >= 1");
    if (i > 0 && p_schedule[i] <= p_schedule[i - 1]) {
      throw std::invalid_argument("p schedule must be strictly increasing");
    }
  }
}

std::vector<Window> build_windows(const Trajectory& traj, int p) {
  if (p < 1) throw std::invalid_argument("build_windows: p must be >= 1");
  const std::size_t len = static_cast<std::size_t>(p) + 1;
  if (traj.snapshots.size() < len) {
    throw std::invalid_argument("build_windows: trajectory has " + std::to_string(traj.snapshots.size()) +
                                " snapshots, need at least " + std::to_string(len));
  }
  std::vector<Window> out;
  out.reserve(traj.snapshots.size() - len + 1);
  const std::span<const Field> all(traj.snapshots);
  for (std::size_t start = 0; start + len <= all.size(); ++start) {
    out.push_back({all.subspan(start, len), traj.snapshot_spacing()});
  }
  return out;
}

// ---------------------------------------------------------------------------

UnrolledLoss::UnrolledLoss(const OperatorModel& model) : engine_(model) {}

namespace {

void check_window(const OperatorModel& model, const Window& w, int p) {
  if (p < 1 || w.states.size() < static_cast<std::size_t>(p) + 1) {
    throw std::invalid_argument("window is shorter than p + 1 states");
  }
  if (!(w.states[0].grid() == model.grid)) throw std::invalid_argument("window grid does not match model grid");
}

}  // namespace

double UnrolledLoss::loss(const Window& window, int p) const {
  const OperatorModel& model = engine_.model();
  check_window(model, window, p);
  const std::size_t n = static_cast<std::size_t>(model.grid.n);
  std::vector<double> u(window.states[0].values().begin(), window.states[0].values().end());
  std::vector<double> rate(n);
  for (int i = 0; i < p; ++i) {
    engine_.apply(u, rate);
    for (std::size_t j = 0; j < n; ++j) u[j] += window.dt * rate[j];
  }
  const Field& target = window.states[static_cast<std::size_t>(p)];
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = u[j] - target[j];
    sum += d * d;
  }
  return model.grid.spacing() * sum;
}

double UnrolledLoss::accumulate(const Window& window, int p, double weight, GradientAccumulator& acc) const {
  const OperatorModel& model = engine_.model();
  check_window(model, window, p);
  const std::size_t n = static_cast<std::size_t>(model.grid.n);
  const double dt = window.dt;
  if (tapes_.size() < static_cast<std::size_t>(p)) tapes_.resize(static_cast<std::size_t>(p));

  std::vector<double> u(window.states[0].values().begin(), window.states[0].values().end());
  std::vector<double> rate(n);
  for (int i = 0; i < p; ++i) {
    engine_.apply(u, rate, &tapes_[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < n; ++j) u[j] += dt * rate[j];
  }

  const Field& target = window.states[static_cast<std::size_t>(p)];
  const double dx = model.grid.spacing();
  std::vector<double> lambda(n);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = u[j] - target[j];
    sum += d * d;
    lambda[j] = weight * 2.0 * dx * d;
  }

  // lambda_i = lambda_{i+1} + dt (dN/du)^T lambda_{i+1}
  std::vector<double> upstream(n), ucot(n);
  for (int i = p - 1; i >= 0; --i) {
    for (std::size_t j = 0; j < n; ++j) upstream[j] = dt * lambda[j];
    engine_.backward(tapes_[static_cast<std::size_t>(i)], upstream, ucot, acc);
    if (i > 0) {
      for (std::size_t j = 0; j < n; ++j) lambda[j] += ucot[j];
    }
  }
  return dx * sum;
}

double multistep_loss(const OperatorModel& model, const Window& window, int p) {
  const double loss = UnrolledLoss(model).loss(window, p);
  if (!std::isfinite(loss)) throw NumericalError("multistep_loss: non-finite loss (divergence)");
  return loss;
}

LossAndGradient loss_gradient(const OperatorModel& model, const Window& window, int p) {
  return batch_loss_gradient(model, std::span<const Window>(&window, 1), p);
}

LossAndGradient batch_loss_gradient(const OperatorModel& model, std::span<const Window> windows, int p) {
  if (windows.empty()) throw std::invalid_argument("batch_loss_gradient: empty batch");
  UnrolledLoss unrolled(model);
  GradientAccumulator acc = unrolled.engine().make_accumulator();
  const double weight = 1.0 / static_cast<double>(windows.size());
  double total = 0.0;
  for (const Window& w : windows) total += unrolled.accumulate(w, p, weight, acc);
  unrolled.engine().finalize(acc);
  return {total * weight, std::move(acc.grads)};
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

TrainResult train_curriculum(const OperatorModel& initial, const std::vector<Trajectory>& trajectories,
                             const TrainConfig& cfg, const StageCallback& on_stage_end) {
  cfg.validate();
  initial.validate();
  if (trajectories.empty()) throw std::invalid_argument("train_curriculum: no trajectories");
  for (const Trajectory& t : trajectories) {
    if (!(t.grid == initial.grid)) throw std::invalid_argument("train_curriculum: trajectory grid mismatch");
  }

  TrainResult result{initial, {}};
  OperatorModel& model = result.model;
  std::vector<double> params = model.flat_parameters();
  AdamState adam = AdamState::zeros(params.size());
  std::mt19937_64 rng(cfg.seed);
  std::size_t iteration = 0;

  for (int p : cfg.p_schedule) {
    std::vector<Window> windows;
    for (const Trajectory& t : trajectories) {
      std::vector<Window> w = build_windows(t, p);
      windows.insert(windows.end(), w.begin(), w.end());
    }
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();
    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), windows.size());
    std::vector<Window> minibatch(batch);

    for (int it = 0; it < cfg.iterations_per_stage; ++it, ++iteration) {
      for (std::size_t b = 0; b < batch; ++b) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        minibatch[b] = windows[order[cursor++]];
      }
      LossAndGradient lg = batch_loss_gradient(model, minibatch, p);
      if (!std::isfinite(lg.loss)) throw DivergenceError(p, iteration);
      const std::vector<double> grads = lg.grads.flatten();
      adam_step(params, grads, adam, cfg);
      model.set_flat_parameters(params);
      result.history.push_back({iteration, p, lg.loss});
    }
    if (on_stage_end) on_stage_end(p, model);
  }
  return result;
}

}  // namespace opreg
