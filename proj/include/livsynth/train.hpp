#pragma once

#include <cstdint>
#include <vector>

#include "livsynth/liv.hpp"
#include "livsynth/params.hpp"
#include "livsynth/tasks.hpp"

namespace livsynth {

struct TrainConfig {
  double peak_lr = 0.0008;
  std::size_t warmup_steps = 30;
  std::size_t total_steps = 300;  ///< 0 disables training
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.1;
  double grad_clip_norm = 1.0;
  double eps = 1e-8;
  std::size_t batch = 8;
  std::uint64_t seed = 0;

  /// Throws ConfigError when the schedule or clip is inconsistent.
  void check() const;
};

/// Linear warm-up from 0 to peak, then cosine decay to 0 at total_steps.
double lr_at(std::size_t step, const TrainConfig& cfg);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t t = 0;
};

/// Scales all gradients so their global L2 norm is at most `max_norm`. Returns the norm before clipping.
double clip_gradients(ParameterStore& params, double max_norm);
double global_grad_norm(const ParameterStore& params);

/// One AdamW update with learning rate `lr` from the gradients currently stored on the parameters.
/// Clips first, then applies bias-corrected moments and decoupled weight decay (decay-flagged tensors only).
void adam_step(ParameterStore& params, AdamState& state, const TrainConfig& cfg, double lr);

/// Mean weighted cross-entropy of the model on one example.
grad::Tensor example_loss(const CompiledBackbone& model, const Example& e);
/// Average of example losses, without building gradients.
double evaluate_loss(const CompiledBackbone& model, const std::vector<Example>& examples);

struct TrainResult {
  std::vector<double> losses;  ///< training loss per step
  double initial_eval_loss = 0.0;
  double eval_loss = 0.0;
};

/// Trains in place. Throws TrainingDiverged on a non-finite loss or layer output.
TrainResult train(CompiledBackbone& model, const Task& task, const TrainConfig& cfg);

}  // namespace livsynth
