#include "livsynth/train.hpp"

#include <cmath>
#include <numbers>

#include "livsynth/errors.hpp"

namespace livsynth {

void TrainConfig::check() const {
  if (total_steps > 0 && (warmup_steps == 0 || warmup_steps > total_steps))
    throw ConfigError("train: need 0 < warmup_steps <= total_steps");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("train: grad_clip_norm must be > 0");
  if (!(peak_lr >= 0.0)) throw ConfigError("train: peak_lr must be >= 0");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) throw ConfigError("train: betas must lie in [0, 1)");
}

double lr_at(std::size_t step, const TrainConfig& cfg) {
  if (cfg.total_steps == 0 || cfg.warmup_steps == 0) return 0.0;
  if (step <= cfg.warmup_steps) return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  if (step >= cfg.total_steps) return 0.0;
  const double progress = static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  return 0.5 * cfg.peak_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

double global_grad_norm(const ParameterStore& params) {
  double s = 0.0;
  for (const auto& e : params.entries())
    for (double g : e.tensor.grad()) s += g * g;
  return std::sqrt(s);
}

double clip_gradients(ParameterStore& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& e : params.entries()) {
      auto& node = e.tensor.node();
      for (auto& g : node.grad) g *= f;
    }
  }
  return norm;
}

void adam_step(ParameterStore& params, AdamState& state, const TrainConfig& cfg, double lr) {
  auto& entries = params.entries();
  if (state.m.size() != entries.size()) {
    state.m.clear();
    state.v.clear();
    for (const auto& e : entries) {
      state.m.emplace_back(e.tensor.size(), 0.0);
      state.v.emplace_back(e.tensor.size(), 0.0);
    }
    state.t = 0;
  }
  clip_gradients(params, cfg.grad_clip_norm);
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto& e = entries[k];
    const auto grad = e.tensor.grad();
    auto values = e.tensor.mutable_values();
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != values.size()) throw ShapeError("optimizer state does not match parameter '" + e.key + "'");
    const double decay = e.decay ? cfg.weight_decay : 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      values[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + decay * values[i]);
    }
  }
}

grad::Tensor example_loss(const CompiledBackbone& model, const Example& e) {
  return grad::cross_entropy(model.forward(e.tokens), e.targets, e.weights);
}

double evaluate_loss(const CompiledBackbone& model, const std::vector<Example>& examples) {
  if (examples.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : examples) s += example_loss(model, e).item();
  return s / static_cast<double>(examples.size());
}

TrainResult train(CompiledBackbone& model, const Task& task, const TrainConfig& cfg) {
  cfg.check();
  TrainResult r;
  auto& params = model.parameters();
  AdamState state;
  try {
    r.initial_eval_loss = evaluate_loss(model, task.eval_set());
  } catch (const NumericError&) {
    throw TrainingDiverged(0);
  }
  if (!std::isfinite(r.initial_eval_loss)) throw TrainingDiverged(0);
  r.eval_loss = r.initial_eval_loss;
  if (cfg.total_steps == 0) return r;

  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    params.zero_grad();
    double loss = 0.0;
    try {
      for (const auto& e : task.train_batch(step, cfg.batch, cfg.seed)) {
        auto l = grad::scale(example_loss(model, e), 1.0 / static_cast<double>(cfg.batch));
        loss += l.item();
        l.backward();
      }
    } catch (const NumericError&) {
      throw TrainingDiverged(step);
    }
    if (!std::isfinite(loss) || !std::isfinite(global_grad_norm(params))) throw TrainingDiverged(step);
    r.losses.push_back(loss);
    adam_step(params, state, cfg, lr_at(step + 1, cfg));
  }
  try {
    r.eval_loss = evaluate_loss(model, task.eval_set());
  } catch (const NumericError&) {
    throw TrainingDiverged(cfg.total_steps);
  }
  if (!std::isfinite(r.eval_loss)) throw TrainingDiverged(cfg.total_steps);
  return r;
}

}  // namespace livsynth
