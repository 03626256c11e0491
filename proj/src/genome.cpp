#include "livsynth/genome.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "livsynth/errors.hpp"

namespace livsynth {

std::string_view field_name(GeneField f) {
  switch (f) {
    case GeneField::LivClass: return "liv_class";
    case GeneField::FeatShareGroup: return "feat_share_group";
    case GeneField::FeatShareStrategy: return "feat_share_strategy";
    case GeneField::GroupShareGroup: return "group_share_group";
    case GeneField::GroupShareStrategy: return "group_share_strategy";
    case GeneField::ResidualGroup: return "residual_group";
  }
  return "?";
}

std::string_view rule_name(Rule r) {
  switch (r) {
    case Rule::UnknownClass: return "unknown-class";
    case Rule::StrategyOutOfRange: return "strategy-out-of-range";
    case Rule::GroupLabelOutOfRange: return "group-label-out-of-range";
    case Rule::CrossClassSharing: return "cross-class-sharing";
    case Rule::StrategyMismatch: return "strategy-mismatch";
    case Rule::ResidualEntryInconsistent: return "residual-entry-inconsistent";
  }
  return "?";
}

int class_occurrences(const BackboneGenome& g, int liv_class) {
  return static_cast<int>(std::count_if(g.genes.begin(), g.genes.end(),
                                        [&](const LivGene& x) { return x.liv_class == liv_class; }));
}

namespace {

int& label_ref(LivGene& g, bool featurizer) { return featurizer ? g.feat_share_group : g.group_share_group; }
int label_of(const LivGene& g, bool featurizer) { return featurizer ? g.feat_share_group : g.group_share_group; }
int& strategy_ref(LivGene& g, bool featurizer) { return featurizer ? g.feat_share_strategy : g.group_share_strategy; }
int strategy_of(const LivGene& g, bool featurizer) {
  return featurizer ? g.feat_share_strategy : g.group_share_strategy;
}

int strategy_count(const LivGene& g, bool featurizer, const OptionPool& pool) {
  return featurizer ? OptionPool::kFeaturizerStrategyCount : pool.group_strategy_count(g.liv_class);
}

bool in_range(int v, int lo, int hi) { return v >= lo && v <= hi; }

// Genes that can take part in sharing: known class, in-range strategy other than 1.
bool is_active(const LivGene& g, bool featurizer, const OptionPool& pool) {
  if (!pool.contains(g.liv_class)) return false;
  const int s = strategy_of(g, featurizer);
  return s != 1 && in_range(s, 1, strategy_count(g, featurizer, pool));
}

std::vector<SharingGroup> collect_groups(const BackboneGenome& g, bool featurizer) {
  std::map<int, SharingGroup> by_label;
  for (std::size_t i = 0; i < g.genes.size(); ++i) {
    const auto& gene = g.genes[i];
    const int s = strategy_of(gene, featurizer);
    if (s == 1) continue;
    auto& grp = by_label[label_of(gene, featurizer)];
    if (grp.members.empty()) {
      grp.label = label_of(gene, featurizer);
      grp.strategy = s;
    }
    grp.members.push_back(i);
  }
  std::vector<SharingGroup> out;
  for (auto& [_, grp] : by_label)
    if (grp.members.size() >= 2) out.push_back(std::move(grp));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.members.front() < b.members.front(); });
  return out;
}

void check_sharing(const BackboneGenome& g, const OptionPool& pool, bool featurizer, std::vector<Violation>& out) {
  const GeneField label_field = featurizer ? GeneField::FeatShareGroup : GeneField::GroupShareGroup;
  const GeneField strategy_field = featurizer ? GeneField::FeatShareStrategy : GeneField::GroupShareStrategy;
  std::map<int, std::size_t> first_active;
  for (std::size_t i = 0; i < g.genes.size(); ++i) {
    const auto& gene = g.genes[i];
    if (!is_active(gene, featurizer, pool)) continue;
    auto [it, inserted] = first_active.emplace(label_of(gene, featurizer), i);
    if (inserted) continue;
    const auto& head = g.genes[it->second];
    if (head.liv_class != gene.liv_class) {
      out.push_back({i, label_field, Rule::CrossClassSharing,
                     "gene " + std::to_string(i + 1) + " (class " + std::to_string(gene.liv_class) +
                         ") shares label " + std::to_string(label_of(gene, featurizer)) + " with gene " +
                         std::to_string(it->second + 1) + " (class " + std::to_string(head.liv_class) + ")"});
    } else if (strategy_of(head, featurizer) != strategy_of(gene, featurizer)) {
      out.push_back({i, strategy_field, Rule::StrategyMismatch,
                     "gene " + std::to_string(i + 1) + " uses strategy " +
                         std::to_string(strategy_of(gene, featurizer)) + " but its group head (gene " +
                         std::to_string(it->second + 1) + ") uses " + std::to_string(strategy_of(head, featurizer))});
    }
  }
}

// Smallest label in 1..n that no other sharing gene holds in this field, or 0.
int fresh_label(const BackboneGenome& g, std::size_t self, bool featurizer, int n, const OptionPool& pool) {
  std::set<int> used;
  for (std::size_t j = 0; j < g.genes.size(); ++j)
    if (j != self && is_active(g.genes[j], featurizer, pool)) used.insert(label_of(g.genes[j], featurizer));
  for (int l = 1; l <= n; ++l)
    if (!used.count(l)) return l;
  return 0;
}

void sever(BackboneGenome& g, std::size_t i, bool featurizer, const OptionPool& pool) {
  const int n = class_occurrences(g, g.genes[i].liv_class);
  const int l = fresh_label(g, i, featurizer, n, pool);
  if (l > 0) {
    label_ref(g.genes[i], featurizer) = l;
  } else {
    // No unused label is available; drop the connection by disabling sharing.
    label_ref(g.genes[i], featurizer) = std::clamp(label_of(g.genes[i], featurizer), 1, std::max(n, 1));
    strategy_ref(g.genes[i], featurizer) = 1;
  }
}

int fresh_residual(const BackboneGenome& g, std::size_t self) {
  std::set<int> used;
  for (std::size_t j = 0; j < g.genes.size(); ++j)
    if (j != self && g.genes[j].residual_group) used.insert(*g.genes[j].residual_group);
  for (int l = 1; l <= static_cast<int>(g.genes.size()); ++l)
    if (!used.count(l)) return l;
  return 1;
}

}  // namespace

std::vector<SharingGroup> featurizer_sharing_groups(const BackboneGenome& g) { return collect_groups(g, true); }
std::vector<SharingGroup> feature_group_sharing_groups(const BackboneGenome& g) { return collect_groups(g, false); }

std::vector<SharingGroup> residual_groups(const BackboneGenome& g) {
  std::map<int, SharingGroup> by_label;
  for (std::size_t i = 0; i < g.genes.size(); ++i) {
    if (!g.genes[i].residual_group) continue;
    auto& grp = by_label[*g.genes[i].residual_group];
    grp.label = *g.genes[i].residual_group;
    grp.members.push_back(i);
  }
  std::vector<SharingGroup> out;
  for (auto& [_, grp] : by_label)
    if (grp.members.size() >= 2) out.push_back(std::move(grp));
  return out;
}

std::vector<Violation> validate(const BackboneGenome& g, const OptionPool& pool) {
  std::vector<Violation> out;
  const bool residual = std::any_of(g.genes.begin(), g.genes.end(), [](const auto& x) { return x.residual_group; });
  for (std::size_t i = 0; i < g.genes.size(); ++i) {
    const auto& gene = g.genes[i];
    const auto idx = std::to_string(i + 1);
    if (!pool.contains(gene.liv_class)) {
      out.push_back({i, GeneField::LivClass, Rule::UnknownClass,
                     "gene " + idx + ": class " + std::to_string(gene.liv_class) + " is not in the pool"});
    } else if (!in_range(gene.group_share_strategy, 1, pool.group_strategy_count(gene.liv_class))) {
      out.push_back({i, GeneField::GroupShareStrategy, Rule::StrategyOutOfRange,
                     "gene " + idx + ": group-share strategy " + std::to_string(gene.group_share_strategy) +
                         " outside 1.." + std::to_string(pool.group_strategy_count(gene.liv_class))});
    }
    if (!in_range(gene.feat_share_strategy, 1, OptionPool::kFeaturizerStrategyCount))
      out.push_back({i, GeneField::FeatShareStrategy, Rule::StrategyOutOfRange,
                     "gene " + idx + ": featurizer-share strategy " + std::to_string(gene.feat_share_strategy) +
                         " outside 1..2"});
    const int n = class_occurrences(g, gene.liv_class);
    if (!in_range(gene.feat_share_group, 1, n))
      out.push_back({i, GeneField::FeatShareGroup, Rule::GroupLabelOutOfRange,
                     "gene " + idx + ": featurizer-share label " + std::to_string(gene.feat_share_group) +
                         " outside 1.." + std::to_string(n)});
    if (!in_range(gene.group_share_group, 1, n))
      out.push_back({i, GeneField::GroupShareGroup, Rule::GroupLabelOutOfRange,
                     "gene " + idx + ": group-share label " + std::to_string(gene.group_share_group) +
                         " outside 1.." + std::to_string(n)});
    if (residual && !gene.residual_group)
      out.push_back({i, GeneField::ResidualGroup, Rule::ResidualEntryInconsistent,
                     "gene " + idx + ": missing residual entry while other genes have one"});
    if (gene.residual_group && !in_range(*gene.residual_group, 1, static_cast<int>(g.genes.size())))
      out.push_back({i, GeneField::ResidualGroup, Rule::GroupLabelOutOfRange,
                     "gene " + idx + ": residual label " + std::to_string(*gene.residual_group) + " outside 1.." +
                         std::to_string(g.genes.size())});
  }
  check_sharing(g, pool, true, out);
  check_sharing(g, pool, false, out);
  return out;
}

BackboneGenome repair(BackboneGenome g, const OptionPool& pool, Rng& rng) {
  const auto ids = pool.class_ids();
  for (int round = 0; round < 8; ++round) {
    const auto violations = validate(g, pool);
    if (violations.empty()) return g;
    // Entries 1, 3 and 5 are resampled; label problems are fixed by severing once classes settle.
    bool resampled = false;
    for (const auto& v : violations) {
      auto& gene = g.genes[v.gene];
      if (v.rule == Rule::UnknownClass) {
        gene.liv_class = ids[rng.index(ids.size())];
        resampled = true;
      } else if (v.rule == Rule::StrategyOutOfRange && v.field == GeneField::FeatShareStrategy) {
        gene.feat_share_strategy = static_cast<int>(rng.uniform_int(1, OptionPool::kFeaturizerStrategyCount));
        resampled = true;
      } else if (v.rule == Rule::StrategyOutOfRange && v.field == GeneField::GroupShareStrategy) {
        gene.group_share_strategy = static_cast<int>(rng.uniform_int(1, pool.group_strategy_count(gene.liv_class)));
        resampled = true;
      }
    }
    if (resampled) continue;
    for (const auto& v : violations) {
      auto& gene = g.genes[v.gene];
      switch (v.rule) {
        case Rule::GroupLabelOutOfRange:
        case Rule::CrossClassSharing:
          if (v.field == GeneField::ResidualGroup) {
            gene.residual_group = fresh_residual(g, v.gene);
          } else {
            sever(g, v.gene, v.field == GeneField::FeatShareGroup, pool);
          }
          break;
        case Rule::StrategyMismatch: {
          // Normalize to the strategy of the group's shallowest active member.
          const bool feat = v.field == GeneField::FeatShareStrategy;
          for (std::size_t j = 0; j < v.gene; ++j) {
            const auto& head = g.genes[j];
            if (label_of(head, feat) == label_of(gene, feat) && head.liv_class == gene.liv_class &&
                is_active(head, feat, pool)) {
              strategy_ref(gene, feat) = strategy_of(head, feat);
              break;
            }
          }
          break;
        }
        case Rule::ResidualEntryInconsistent:
          gene.residual_group = fresh_residual(g, v.gene);
          break;
        default:
          break;
      }
    }
  }
  // Last resort: drop every remaining connection.
  for (const auto& v : validate(g, pool)) {
    auto& gene = g.genes[v.gene];
    const int n = std::max(class_occurrences(g, gene.liv_class), 1);
    gene.feat_share_group = std::clamp(gene.feat_share_group, 1, n);
    gene.group_share_group = std::clamp(gene.group_share_group, 1, n);
    gene.feat_share_strategy = 1;
    gene.group_share_strategy = 1;
    if (gene.residual_group) gene.residual_group = fresh_residual(g, v.gene);
  }
  return g;
}

BackboneGenome mutate(const BackboneGenome& g, double per_position_rate, const OptionPool& pool, Rng& rng) {
  if (per_position_rate < 0.0 || per_position_rate > 1.0) throw InputError("mutation rate must lie in [0, 1]");
  BackboneGenome out = g;
  const auto ids = pool.class_ids();
  const int depth = static_cast<int>(out.genes.size());
  for (auto& gene : out.genes) {
    if (rng.bernoulli(per_position_rate)) gene.liv_class = ids[rng.index(ids.size())];
    const bool known = pool.contains(gene.liv_class);
    const int n = std::max(class_occurrences(out, gene.liv_class), 1);
    if (rng.bernoulli(per_position_rate)) gene.feat_share_group = static_cast<int>(rng.uniform_int(1, n));
    if (rng.bernoulli(per_position_rate))
      gene.feat_share_strategy = static_cast<int>(rng.uniform_int(1, OptionPool::kFeaturizerStrategyCount));
    if (rng.bernoulli(per_position_rate)) gene.group_share_group = static_cast<int>(rng.uniform_int(1, n));
    if (rng.bernoulli(per_position_rate) && known)
      gene.group_share_strategy = static_cast<int>(rng.uniform_int(1, pool.group_strategy_count(gene.liv_class)));
    if (gene.residual_group && rng.bernoulli(per_position_rate))
      gene.residual_group = static_cast<int>(rng.uniform_int(1, depth));
  }
  return repair(std::move(out), pool, rng);
}

std::pair<BackboneGenome, BackboneGenome> crossover_at(const BackboneGenome& a, const BackboneGenome& b,
                                                       std::vector<std::size_t> cuts) {
  if (a.depth() != b.depth()) throw ShapeError("crossover parents differ in depth");
  if (a.width != b.width) throw ShapeError("crossover parents differ in width");
  std::sort(cuts.begin(), cuts.end());
  BackboneGenome c1 = a, c2 = b;
  bool swapped = false;
  std::size_t next = 0;
  for (std::size_t i = 0; i < a.depth(); ++i) {
    while (next < cuts.size() && cuts[next] == i) {
      swapped = !swapped;
      ++next;
    }
    if (swapped) std::swap(c1.genes[i], c2.genes[i]);
  }
  return {std::move(c1), std::move(c2)};
}

std::pair<BackboneGenome, BackboneGenome> crossover(const BackboneGenome& a, const BackboneGenome& b, int k,
                                                    const OptionPool& pool, Rng& rng) {
  if (a.depth() != b.depth()) throw ShapeError("crossover parents differ in depth");
  if (a.width != b.width) throw ShapeError("crossover parents differ in width");
  const std::size_t depth = a.depth();
  if (k < 0 || static_cast<std::size_t>(k) >= std::max<std::size_t>(depth, 1))
    throw ShapeError("crossover needs 0 <= k < depth");
  // Partial Fisher-Yates over the depth-1 interior boundaries.
  std::vector<std::size_t> boundaries(depth - 1);
  for (std::size_t i = 0; i + 1 < depth; ++i) boundaries[i] = i + 1;
  for (int i = 0; i < k; ++i) {
    const std::size_t j = i + rng.index(boundaries.size() - i);
    std::swap(boundaries[i], boundaries[j]);
  }
  boundaries.resize(k);
  auto [c1, c2] = crossover_at(a, b, std::move(boundaries));
  return {repair(std::move(c1), pool, rng), repair(std::move(c2), pool, rng)};
}

BackboneGenome random_genome(std::size_t depth, int width, const OptionPool& pool, Rng& rng, bool residual_entry) {
  if (depth < 1) throw InputError("random genome depth must be >= 1");
  const auto ids = pool.class_ids();
  BackboneGenome g;
  g.width = width;
  g.genes.resize(depth);
  for (auto& gene : g.genes) gene.liv_class = ids[rng.index(ids.size())];
  for (auto& gene : g.genes) {
    const int n = class_occurrences(g, gene.liv_class);
    gene.feat_share_group = static_cast<int>(rng.uniform_int(1, n));
    gene.feat_share_strategy = static_cast<int>(rng.uniform_int(1, OptionPool::kFeaturizerStrategyCount));
    gene.group_share_group = static_cast<int>(rng.uniform_int(1, n));
    gene.group_share_strategy = static_cast<int>(rng.uniform_int(1, pool.group_strategy_count(gene.liv_class)));
    if (residual_entry) gene.residual_group = static_cast<int>(rng.uniform_int(1, static_cast<std::int64_t>(depth)));
  }
  return repair(std::move(g), pool, rng);
}

BackboneGenome striped_hybrid(std::size_t depth, int width, int baseline_class) {
  BackboneGenome g;
  g.width = width;
  std::map<int, int> seen;
  for (std::size_t i = 0; i < depth; ++i) {
    const int cls = (i % 2 == 0) ? baseline_class : classes::kGMemless;
    const int label = ++seen[cls];
    g.genes.push_back(LivGene{cls, label, 1, label, 1, std::nullopt});
  }
  return g;
}

std::vector<BackboneGenome> seed_population(std::size_t n, std::size_t depth, int width, const OptionPool& pool,
                                            Rng& rng, double hybrid_fraction, std::vector<int> baselines) {
  if (n < 1) throw InputError("population size must be >= 1");
  if (hybrid_fraction < 0.0 || hybrid_fraction > 1.0) throw InputError("hybrid fraction must lie in [0, 1]");
  if (baselines.empty()) baselines = {classes::kSA1};
  const auto hybrids = static_cast<std::size_t>(std::lround(static_cast<double>(n) * hybrid_fraction));
  std::vector<BackboneGenome> out;
  out.reserve(n);
  for (std::size_t i = 0; i < hybrids; ++i) out.push_back(striped_hybrid(depth, width, baselines[i % baselines.size()]));
  while (out.size() < n) out.push_back(random_genome(depth, width, pool, rng));
  return out;
}

namespace {

bool is_sep(char c) { return c == '-' || std::isspace(static_cast<unsigned char>(c)); }

LivGene gene_from(const std::vector<int>& v, std::size_t pos) {
  if (v.size() != 5 && v.size() != 6)
    throw ParseError("gene segment must hold 5 or 6 integers, found " + std::to_string(v.size()), pos);
  LivGene g{v[0], v[1], v[2], v[3], v[4], std::nullopt};
  if (v.size() == 6) g.residual_group = v[5];
  return g;
}

}  // namespace

BackboneGenome parse_genome(std::string_view text, int width) {
  BackboneGenome g;
  g.width = width;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_sep(text[i])) ++i;
    if (i >= n) break;
    const std::size_t start = i;
    std::size_t end = i;
    while (end < n && !is_sep(text[end])) ++end;
    const std::string_view seg = text.substr(start, end - start);
    std::vector<int> values;
    if (seg.find(',') != std::string_view::npos) {
      std::size_t p = 0;
      while (p <= seg.size()) {
        const std::size_t q = std::min(seg.find(',', p), seg.size());
        const std::string_view num = seg.substr(p, q - p);
        if (num.empty()) throw ParseError("empty integer in gene segment", start + p);
        int value = 0;
        for (std::size_t c = 0; c < num.size(); ++c) {
          if (!std::isdigit(static_cast<unsigned char>(num[c])))
            throw ParseError(std::string("unexpected character '") + num[c] + "'", start + p + c);
          value = value * 10 + (num[c] - '0');
          if (value > 1'000'000) throw ParseError("integer too large", start + p);
        }
        values.push_back(value);
        p = q + 1;
      }
    } else {
      for (std::size_t c = 0; c < seg.size(); ++c) {
        if (!std::isdigit(static_cast<unsigned char>(seg[c])))
          throw ParseError(std::string("unexpected character '") + seg[c] + "'", start + c);
        values.push_back(seg[c] - '0');
      }
    }
    g.genes.push_back(gene_from(values, start));
    if (g.genes.size() > 1 && g.genes.back().residual_group.has_value() != g.genes.front().residual_group.has_value())
      throw ParseError("all gene segments must have the same number of entries", start);
    i = end;
  }
  return g;
}

std::string format_genome(const BackboneGenome& g) {
  std::ostringstream os;
  for (std::size_t i = 0; i < g.genes.size(); ++i) {
    const auto& x = g.genes[i];
    if (i) os << '-';
    os << x.liv_class << ',' << x.feat_share_group << ',' << x.feat_share_strategy << ',' << x.group_share_group << ','
       << x.group_share_strategy;
    if (x.residual_group) os << ',' << *x.residual_group;
  }
  return os.str();
}

std::string format_compact(const BackboneGenome& g) {
  std::ostringstream os;
  for (std::size_t i = 0; i < g.genes.size(); ++i) {
    const auto& x = g.genes[i];
    std::vector<int> v{x.liv_class, x.feat_share_group, x.feat_share_strategy, x.group_share_group,
                       x.group_share_strategy};
    if (x.residual_group) v.push_back(*x.residual_group);
    if (i) os << '-';
    for (int d : v) {
      if (d < 0 || d > 9) throw InputError("compact form requires single-digit entries; use format_genome");
      os << d;
    }
  }
  return os.str();
}

std::uint64_t genome_hash(const BackboneGenome& g) {
  std::uint64_t h = 1469598103934665603ULL;
  const std::string text = format_genome(g) + "@" + std::to_string(g.width);
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace livsynth
