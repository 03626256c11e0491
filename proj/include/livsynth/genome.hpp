#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "livsynth/option_pool.hpp"
#include "livsynth/rng.hpp"

namespace livsynth {

/// One 5-integer (optionally 6-integer) backbone segment.
struct LivGene {
  int liv_class = 1;
  int feat_share_group = 1;
  int feat_share_strategy = 1;
  int group_share_group = 1;
  int group_share_strategy = 1;
  std::optional<int> residual_group;

  friend bool operator==(const LivGene&, const LivGene&) = default;
};

struct BackboneGenome {
  std::vector<LivGene> genes;
  int width = 32;

  std::size_t depth() const { return genes.size(); }
  bool has_residual_entry() const { return !genes.empty() && genes.front().residual_group.has_value(); }

  friend bool operator==(const BackboneGenome&, const BackboneGenome&) = default;
};

enum class GeneField { LivClass, FeatShareGroup, FeatShareStrategy, GroupShareGroup, GroupShareStrategy, ResidualGroup };

std::string_view field_name(GeneField f);

enum class Rule {
  UnknownClass,
  StrategyOutOfRange,
  GroupLabelOutOfRange,
  CrossClassSharing,
  StrategyMismatch,
  ResidualEntryInconsistent,
};

std::string_view rule_name(Rule r);

struct Violation {
  std::size_t gene = 0;
  GeneField field = GeneField::LivClass;
  Rule rule = Rule::UnknownClass;
  std::string message;
};

/// Number of genes of `liv_class` (the label range N for that class).
int class_occurrences(const BackboneGenome& g, int liv_class);

/// A set of genes connected by one sharing label (featurizer or feature-group sharing).
struct SharingGroup {
  int label = 0;
  int strategy = 1;  ///< strategy of the shallowest member
  std::vector<std::size_t> members;  ///< ascending gene indices, size >= 2
};

/// Active sharing groups: genes whose strategy is not 1, keyed by label, with two or more members.
std::vector<SharingGroup> featurizer_sharing_groups(const BackboneGenome& g);
std::vector<SharingGroup> feature_group_sharing_groups(const BackboneGenome& g);
/// Residual-extension groups (genes with equal sixth entries), two or more members.
std::vector<SharingGroup> residual_groups(const BackboneGenome& g);

/// All rule violations; never throws.
std::vector<Violation> validate(const BackboneGenome& g, const OptionPool& pool);

/// Returns a genome for which validate() is empty. Valid inputs come back unchanged.
BackboneGenome repair(BackboneGenome g, const OptionPool& pool, Rng& rng);

/// Independently replaces each integer with probability `per_position_rate`, then repairs.
BackboneGenome mutate(const BackboneGenome& g, double per_position_rate, const OptionPool& pool, Rng& rng);

/// k-point crossover at gene boundaries. Both children are repaired.
std::pair<BackboneGenome, BackboneGenome> crossover(const BackboneGenome& a, const BackboneGenome& b, int k,
                                                    const OptionPool& pool, Rng& rng);

/// Crossover at explicit cut points (gene indices in 1..depth-1), without repair.
std::pair<BackboneGenome, BackboneGenome> crossover_at(const BackboneGenome& a, const BackboneGenome& b,
                                                       std::vector<std::size_t> cuts);

BackboneGenome random_genome(std::size_t depth, int width, const OptionPool& pool, Rng& rng,
                             bool residual_entry = false);

/// Striped hybrid of `baseline_class` and the memoryless class, with no sharing.
BackboneGenome striped_hybrid(std::size_t depth, int width, int baseline_class);

/// `round(n * hybrid_fraction)` striped hybrids (baselines cycle SA-1, Rec-1, GConv-1), the rest random.
std::vector<BackboneGenome> seed_population(std::size_t n, std::size_t depth, int width, const OptionPool& pool,
                                            Rng& rng, double hybrid_fraction,
                                            std::vector<int> baselines = {classes::kSA1, classes::kRec1,
                                                                          classes::kGConv1});

/// Parses compact ("21211-31112") or canonical ("2,1,2,1,1-3,1,1,1,2") text.
BackboneGenome parse_genome(std::string_view text, int width = 32);
/// Canonical form: comma-separated integers per gene, genes joined by '-'.
std::string format_genome(const BackboneGenome& g);
/// Compact form; only valid when every entry is a single digit.
std::string format_compact(const BackboneGenome& g);

/// Stable 64-bit hash of the canonical text plus width.
std::uint64_t genome_hash(const BackboneGenome& g);

}  // namespace livsynth
