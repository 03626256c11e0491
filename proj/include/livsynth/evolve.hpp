#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "livsynth/fitness.hpp"
#include "livsynth/genome.hpp"
#include "livsynth/rng.hpp"

namespace livsynth {

enum class Algorithm { GA, FA, NSGA2 };

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct EvolutionConfig {
  Algorithm algorithm = Algorithm::NSGA2;
  std::size_t population = 16;
  std::size_t generations = 18;
  std::size_t tournament = 2;
  int crossover_points = 2;
  double mutation_rate = 0.10;
  std::size_t elites = 2;
  double fa_beta0 = 1.0;
  double fa_gamma = 1.0;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;

  void check() const;
};

/// U(x) = (x - min) / (max - min); a constant list maps to zeros.
std::vector<double> normalize(const std::vector<double>& values);

/// a dominates b: no worse in every objective and better in one. Finite scores dominate diverged ones.
bool dominates(const ScoreVector& a, const ScoreVector& b);

/// Fronts of indices, best first.
std::vector<std::vector<std::size_t>> non_dominated_sort(const std::vector<ScoreVector>& scores);

/// Crowding distance of each member of one front; boundary members get +infinity.
std::vector<double> crowding_distance(const std::vector<ScoreVector>& front);

/// Sum of normalized objectives over the population; diverged members get +infinity.
std::vector<double> scalarize(const std::vector<ScoreVector>& scores);

/// beta0 * (1 - exp(-gamma * (1 - r))) when a_j > a_i, else 0.
double fa_attraction(double a_i, double a_j, double r, double beta0, double gamma);
/// Fraction of positions whose LIV classes agree.
double class_similarity(const BackboneGenome& a, const BackboneGenome& b);
/// Each gene of `i` is replaced by the gene of `j` with probability beta.
BackboneGenome fa_move(const BackboneGenome& i, const BackboneGenome& j, double beta, Rng& rng);

/// Samples k distinct indices of [0, n) and returns the best under `better(x, y)`; ties are broken uniformly.
std::size_t tournament_select(std::size_t n, std::size_t k, Rng& rng,
                              const std::function<bool(std::size_t, std::size_t)>& better);

/// Volume dominated by `points` (minimization) and bounded by `reference`.
double hypervolume(const std::vector<std::vector<double>>& points, const std::vector<double>& reference);

struct Candidate {
  BackboneGenome genome;
  ScoreVector score;
  std::size_t rank = 0;      ///< 1-based front index
  double crowding = 0.0;
  double fitness = 0.0;      ///< scalarized score for GA/FA
  bool cached = false;       ///< score reused from an earlier evaluation
};

struct HistoryRecord {
  std::size_t generation = 0;
  std::size_t index = 0;
  Candidate candidate;
  bool selected = true;  ///< false for offspring dropped by environmental selection
};

struct EvolutionState {
  std::size_t generation = 0;
  std::vector<Candidate> population;
  std::vector<HistoryRecord> history;
  Rng rng{0};
  /// genome hash -> score, so repeated genomes are not re-evaluated
  std::map<std::uint64_t, ScoreVector> memo;
};

/// Scores one genome; `seed` is derived from the run seed and the genome.
using Evaluator = std::function<ScoreVector(const BackboneGenome&, std::uint64_t seed)>;
/// Called after each generation (including generation 0) with that generation's records.
using GenerationHook = std::function<void(const EvolutionState&, const std::vector<HistoryRecord>&)>;

/// Scores a generation's candidates (in parallel when configured), reusing the memo.
void score_candidates(std::vector<Candidate>& cands, EvolutionState& state, const EvolutionConfig& cfg,
                      const Evaluator& evaluate);
/// Fills rank, crowding and fitness for the population.
void assign_ranks(std::vector<Candidate>& pop);

/// Evaluates the seed population as generation 0.
EvolutionState initialize(const EvolutionConfig& cfg, const Evaluator& evaluate, std::vector<BackboneGenome> seeds,
                          const GenerationHook& hook = {});
/// Advances one generation.
void step(EvolutionState& state, const EvolutionConfig& cfg, const Evaluator& evaluate, const OptionPool& pool,
          const GenerationHook& hook = {});
/// Runs until `cfg.generations` generations exist after generation 0. Continues from `state` when resuming.
void run_to_end(EvolutionState& state, const EvolutionConfig& cfg, const Evaluator& evaluate, const OptionPool& pool,
                const GenerationHook& hook = {});
EvolutionState run(const EvolutionConfig& cfg, const Evaluator& evaluate, const OptionPool& pool,
                   std::vector<BackboneGenome> seeds, const GenerationHook& hook = {});

}  // namespace livsynth
