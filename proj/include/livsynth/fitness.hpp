#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "livsynth/cost.hpp"
#include "livsynth/tasks.hpp"
#include "livsynth/train.hpp"

namespace livsynth {

enum class Objective { Quality, Size, Cache };

std::string objective_name(Objective o);
Objective parse_objective(const std::string& name);

/// Per-genome objective values, all minimized.
struct ScoreVector {
  std::vector<double> values;
  bool diverged = false;
  std::string note;  ///< reason when diverged

  friend bool operator==(const ScoreVector&, const ScoreVector&) = default;
};

inline constexpr double kDivergedQuality = std::numeric_limits<double>::infinity();

struct ObjectiveSpec {
  std::vector<Objective> objectives{Objective::Quality};
  std::size_t cache_seq_len = 4096;
  std::size_t bytes_per_element = kDefaultBytesPerElement;
  CompileDims dims;
  TaskSpec task;
  TrainConfig train;

  bool needs_training() const;
  void check() const;
};

/// Binds genomes to score vectors; safe to call concurrently.
class FitnessEvaluator {
 public:
  FitnessEvaluator(ObjectiveSpec spec, const OptionPool& pool);

  const ObjectiveSpec& spec() const { return spec_; }
  /// `seed` drives parameter initialization and batch order. Failures yield a diverged score.
  ScoreVector evaluate(const BackboneGenome& genome, std::uint64_t seed) const;

 private:
  ObjectiveSpec spec_;
  const OptionPool& pool_;
  std::optional<Task> task_;
};

}  // namespace livsynth
