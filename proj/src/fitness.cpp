#include "livsynth/fitness.hpp"

#include <algorithm>

#include "livsynth/errors.hpp"

namespace livsynth {

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::Quality: return "quality";
    case Objective::Size: return "size";
    case Objective::Cache: return "cache";
  }
  return "?";
}

Objective parse_objective(const std::string& name) {
  if (name == "quality") return Objective::Quality;
  if (name == "size") return Objective::Size;
  if (name == "cache") return Objective::Cache;
  throw ConfigError("unknown objective '" + name + "' (expected quality, size or cache)");
}

bool ObjectiveSpec::needs_training() const {
  return std::find(objectives.begin(), objectives.end(), Objective::Quality) != objectives.end();
}

void ObjectiveSpec::check() const {
  if (objectives.empty()) throw ConfigError("at least one objective is required");
  for (std::size_t i = 0; i < objectives.size(); ++i)
    for (std::size_t j = i + 1; j < objectives.size(); ++j)
      if (objectives[i] == objectives[j]) throw ConfigError("objective '" + objective_name(objectives[i]) + "' listed twice");
  if (cache_seq_len < 1) throw ConfigError("cache_seq_len must be >= 1");
  if (bytes_per_element < 1) throw ConfigError("bytes_per_element must be >= 1");
  if (needs_training()) {
    train.check();
    if (task.vocab != dims.vocab) throw ConfigError("task vocab must equal the model vocab");
    if (task.seq_len > dims.seq_len) throw ConfigError("task seq_len must not exceed the model seq_len");
  }
}

FitnessEvaluator::FitnessEvaluator(ObjectiveSpec spec, const OptionPool& pool) : spec_(std::move(spec)), pool_(pool) {
  spec_.check();
  if (spec_.needs_training()) task_.emplace(spec_.task);
}

ScoreVector FitnessEvaluator::evaluate(const BackboneGenome& genome, std::uint64_t seed) const {
  ScoreVector s;
  s.values.assign(spec_.objectives.size(), 0.0);
  try {
    std::optional<CostReport> cost;
    for (std::size_t k = 0; k < spec_.objectives.size(); ++k) {
      const auto obj = spec_.objectives[k];
      if (obj == Objective::Quality) continue;
      if (!cost) cost = analyze(genome, spec_.dims, pool_, spec_.cache_seq_len, spec_.bytes_per_element);
      s.values[k] = static_cast<double>(obj == Objective::Size ? cost->parameter_count : cost->cache_bytes);
    }
    if (spec_.needs_training()) {
      auto model = compile(genome, spec_.dims, pool_, seed);
      TrainConfig cfg = spec_.train;
      cfg.seed = splitmix64(cfg.seed ^ seed);
      const auto result = train(model, *task_, cfg);
      for (std::size_t k = 0; k < spec_.objectives.size(); ++k)
        if (spec_.objectives[k] == Objective::Quality) s.values[k] = result.eval_loss;
    }
  } catch (const Error& e) {
    s.diverged = true;
    s.note = e.what();
    for (std::size_t k = 0; k < spec_.objectives.size(); ++k)
      if (spec_.objectives[k] == Objective::Quality) s.values[k] = kDivergedQuality;
  }
  return s;
}

}  // namespace livsynth
