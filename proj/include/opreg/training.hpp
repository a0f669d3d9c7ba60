#pragma once

// Multi-step regression of operator models on trajectory windows: unrolled
// Euler loss, its exact gradient, Adam, and the p-curriculum.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "opreg/dynamics.hpp"
#include "opreg/operator.hpp"

namespace opreg {

/// p + 1 consecutive snapshots of one trajectory.
struct Window {
  std::span<const Field> states;
  double dt = 0.0;

  int steps() const { return static_cast<int>(states.size()) - 1; }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int iterations_per_stage = 2000;
  std::vector<int> p_schedule{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  static AdamState zeros(std::size_t size) { return {std::vector<double>(size, 0.0), std::vector<double>(size, 0.0), 0}; }
};

/// All contiguous windows of length p + 1. The trajectory references must
/// outlive the windows.
std::vector<Window> build_windows(const Trajectory& traj, int p);

/// Rectangle-rule integral of the squared mismatch after p unrolled steps.
double multistep_loss(const OperatorModel& model, const Window& window, int p);

struct LossAndGradient {
  double loss = 0.0;
  ModelGradient grads;
};

LossAndGradient loss_gradient(const OperatorModel& model, const Window& window, int p);

/// Mean loss and mean gradient over a set of windows.
LossAndGradient batch_loss_gradient(const OperatorModel& model, std::span<const Window> windows, int p);

/// Reusable unrolled-loss evaluator bound to one model snapshot.
class UnrolledLoss {
 public:
  explicit UnrolledLoss(const OperatorModel& model);

  double loss(const Window& window, int p) const;
  /// Adds weight * d loss / d params into acc (g networks pending finalize)
  /// and returns the loss.
  double accumulate(const Window& window, int p, double weight, GradientAccumulator& acc) const;

  const OperatorEngine& engine() const { return engine_; }

 private:
  OperatorEngine engine_;
  mutable std::vector<StepTape> tapes_;
};

/// Bias-corrected Adam update of params in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg);

struct LossRecord {
  std::size_t iteration = 0;  // global, 0-based
  int p = 0;
  double loss = 0.0;
};

struct TrainResult {
  OperatorModel model;
  std::vector<LossRecord> history;
};

/// Called after each stage with the stage's p and the warm-started model.
using StageCallback = std::function<void(int p, const OperatorModel& model)>;

TrainResult train_curriculum(const OperatorModel& initial, const std::vector<Trajectory>& trajectories,
                             const TrainConfig& cfg, const StageCallback& on_stage_end = {});

}  // namespace opreg
