#pragma once

#include <string>
#include <vector>

#include "livsynth/evolve.hpp"
#include "livsynth/fitness.hpp"
#include "livsynth/records.hpp"

namespace livsynth {

struct SeedingConfig {
  std::size_t depth = 6;
  double hybrid_fraction = 0.25;
  std::vector<int> baselines{classes::kSA1, classes::kRec1, classes::kGConv1};
  /// Explicit seed genomes (text); the rest of the population is generated.
  std::vector<std::string> genomes;
};

/// Everything an evolution run needs, read from one JSON file.
struct RunConfig {
  EvolutionConfig evolution;
  ObjectiveSpec objectives;
  SeedingConfig seeding;
  std::string pool = "standard";
  std::string output_dir = "results";
  std::size_t snapshot_every = 1;

  void check() const;
};

/// Parses and validates; unknown keys and type mismatches raise ConfigError naming the field.
RunConfig parse_run_config(const json& j);
RunConfig load_run_config(const std::string& path);
json run_config_to_json(const RunConfig& c);

const OptionPool& resolve_pool(const std::string& name);

/// Seed population for a run: explicit genomes first, then the generated remainder.
std::vector<BackboneGenome> build_seed_population(const RunConfig& c, const OptionPool& pool);

}  // namespace livsynth
