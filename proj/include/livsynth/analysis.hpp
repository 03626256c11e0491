#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "livsynth/genome.hpp"

namespace livsynth {

enum class ArcKind { Featurizer, FeatureGroup };

/// One sharing group drawn as an arc through its members.
struct Arc {
  ArcKind kind = ArcKind::Featurizer;
  int label = 0;
  int strategy = 1;
  std::vector<std::size_t> positions;  ///< 1-based, ascending
  std::vector<std::string> roles;      ///< routed feature groups (feature-group arcs only)
};

std::vector<Arc> sharing_arcs(const BackboneGenome& g, const OptionPool& pool);

/// Depth-ordered list; feature-group arcs dashed on the left, featurizer arcs solid on the right.
std::string render_text(const BackboneGenome& g, const OptionPool& pool);
/// Graphviz description of the same picture.
std::string render_dot(const BackboneGenome& g, const OptionPool& pool);

/// Number of other LIVs strictly between consecutive members of each sharing group.
std::vector<std::size_t> sharing_distances(const BackboneGenome& g);

struct MotifRow {
  std::size_t generation = 0;
  std::size_t genomes = 0;
  std::map<int, std::size_t> class_counts;  ///< every class of the pool, zeros included
  std::size_t featurizer_shared = 0;        ///< LIVs in a featurizer-sharing group
  std::size_t group_shared = 0;             ///< LIVs in a feature-group-sharing group
  std::size_t pairs = 0;                    ///< connected pairs behind mean_distance
  double mean_distance = 0.0;               ///< 0 when there are no pairs
};

struct MotifReport {
  std::vector<MotifRow> rows;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

/// Aggregates over one population.
MotifRow motif_row(std::size_t generation, const std::vector<BackboneGenome>& population, const OptionPool& pool);
/// Reads a results log, using the selected (population) records of each generation.
MotifReport motifs_from_log(std::istream& log, const OptionPool& pool);

}  // namespace livsynth
