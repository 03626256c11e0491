#include "livsynth/evolve.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "livsynth/errors.hpp"

namespace livsynth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Uniform shuffle with our own RNG so the order does not depend on the standard library.
template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

// Stable sort after a shuffle: equal keys end up in uniformly random order.
template <class Less>
std::vector<std::size_t> order_by(std::size_t n, Rng& rng, Less less) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  shuffle(idx, rng);
  std::stable_sort(idx.begin(), idx.end(), less);
  return idx;
}

bool nsga_better(const Candidate& a, const Candidate& b) {
  if (a.rank != b.rank) return a.rank < b.rank;
  return a.crowding > b.crowding;
}

std::uint64_t evaluation_seed(std::uint64_t run_seed, const BackboneGenome& g) {
  return splitmix64(run_seed ^ genome_hash(g));
}

}  // namespace

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::GA: return "ga";
    case Algorithm::FA: return "fa";
    case Algorithm::NSGA2: return "nsga2";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "ga") return Algorithm::GA;
  if (s == "fa") return Algorithm::FA;
  if (s == "nsga2" || s == "nsga-2") return Algorithm::NSGA2;
  throw ConfigError("unknown algorithm '" + name + "' (expected ga, fa or nsga2)");
}

void EvolutionConfig::check() const {
  if (population < 2) throw ConfigError("population must be >= 2");
  if (elites >= population) throw ConfigError("elites must be smaller than the population");
  if (tournament < 1 || tournament > population) throw ConfigError("tournament size must be in [1, population]");
  if (crossover_points < 0) throw ConfigError("crossover_points must be >= 0");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("mutation_rate must be in [0, 1]");
  if (fa_beta0 < 0.0 || fa_gamma < 0.0) throw ConfigError("fa_beta0 and fa_gamma must be >= 0");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
}

std::vector<double> normalize(const std::vector<double>& values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo, range = *hi - *lo;
  std::vector<double> out(values.size(), 0.0);
  if (range > 0.0)
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - min) / range;
  return out;
}

bool dominates(const ScoreVector& a, const ScoreVector& b) {
  if (a.diverged != b.diverged) return !a.diverged;
  if (a.diverged) return false;
  bool strictly = false;
  const std::size_t m = std::min(a.values.size(), b.values.size());
  for (std::size_t k = 0; k < m; ++k) {
    if (a.values[k] > b.values[k]) return false;
    if (a.values[k] < b.values[k]) strictly = true;
  }
  return strictly;
}

std::vector<std::vector<std::size_t>> non_dominated_sort(const std::vector<ScoreVector>& scores) {
  const std::size_t n = scores.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (dominates(scores[i], scores[j])) dominated[i].push_back(j);
      else if (dominates(scores[j], scores[i])) ++count[i];
    }
    if (count[i] == 0) current.push_back(i);
  }
  while (!current.empty()) {
    fronts.push_back(current);
    std::vector<std::size_t> next;
    for (auto i : current)
      for (auto j : dominated[i])
        if (--count[j] == 0) next.push_back(j);
    std::sort(next.begin(), next.end());
    current = std::move(next);
  }
  return fronts;
}

std::vector<double> crowding_distance(const std::vector<ScoreVector>& front) {
  const std::size_t n = front.size();
  std::vector<double> dist(n, 0.0);
  if (n <= 2) {
    std::fill(dist.begin(), dist.end(), kInf);
    return dist;
  }
  std::size_t m = front.front().values.size();
  for (const auto& s : front) m = std::min(m, s.values.size());
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return front[a].values[k] < front[b].values[k]; });
    dist[idx.front()] = kInf;
    dist[idx.back()] = kInf;
    const double range = front[idx.back()].values[k] - front[idx.front()].values[k];
    if (!(range > 0.0) || !std::isfinite(range)) continue;
    for (std::size_t r = 1; r + 1 < n; ++r) {
      const double gap = front[idx[r + 1]].values[k] - front[idx[r - 1]].values[k];
      if (std::isfinite(dist[idx[r]])) dist[idx[r]] += gap / range;
    }
  }
  return dist;
}

std::vector<double> scalarize(const std::vector<ScoreVector>& scores) {
  std::vector<double> total(scores.size(), 0.0);
  std::vector<std::size_t> finite;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].diverged) total[i] = kInf;
    else finite.push_back(i);
  }
  if (finite.empty()) return total;
  std::size_t m = scores[finite.front()].values.size();
  for (std::size_t k = 0; k < m; ++k) {
    std::vector<double> col;
    for (auto i : finite) col.push_back(scores[i].values[k]);
    const auto u = normalize(col);
    for (std::size_t r = 0; r < finite.size(); ++r) total[finite[r]] += u[r];
  }
  return total;
}

double fa_attraction(double a_i, double a_j, double r, double beta0, double gamma) {
  if (!(a_j > a_i)) return 0.0;
  return beta0 * (1.0 - std::exp(-gamma * (1.0 - r)));
}

double class_similarity(const BackboneGenome& a, const BackboneGenome& b) {
  const std::size_t n = std::max(a.depth(), b.depth());
  if (n == 0) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < std::min(a.depth(), b.depth()); ++i)
    if (a.genes[i].liv_class == b.genes[i].liv_class) ++same;
  return static_cast<double>(same) / static_cast<double>(n);
}

BackboneGenome fa_move(const BackboneGenome& i, const BackboneGenome& j, double beta, Rng& rng) {
  BackboneGenome out = i;
  if (beta <= 0.0) return out;
  for (std::size_t p = 0; p < std::min(i.depth(), j.depth()); ++p)
    if (rng.bernoulli(beta)) out.genes[p] = j.genes[p];
  return out;
}

std::size_t tournament_select(std::size_t n, std::size_t k, Rng& rng,
                              const std::function<bool(std::size_t, std::size_t)>& better) {
  if (n == 0) throw InputError("tournament over an empty population");
  k = std::clamp<std::size_t>(k, 1, n);
  // partial Fisher-Yates: the first k entries are a uniform sample without replacement
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  std::size_t best = idx[0];
  std::size_t ties = 1;
  for (std::size_t i = 1; i < k; ++i) {
    const auto c = idx[i];
    if (better(c, best)) {
      best = c;
      ties = 1;
    } else if (!better(best, c)) {
      // reservoir sampling over equally good entrants
      if (rng.index(++ties) == 0) best = c;
    }
  }
  return best;
}

namespace {

double hv_recursive(std::vector<std::vector<double>> pts, const std::vector<double>& ref, std::size_t dims) {
  if (pts.empty()) return 0.0;
  if (dims == 1) {
    double best = ref[0];
    for (const auto& p : pts) best = std::min(best, p[0]);
    return ref[0] - best;
  }
  const std::size_t last = dims - 1;
  std::sort(pts.begin(), pts.end(), [&](const auto& a, const auto& b) { return a[last] < b[last]; });
  double volume = 0.0;
  std::vector<std::vector<double>> slice;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    slice.push_back(pts[i]);
    const double upper = i + 1 < pts.size() ? pts[i + 1][last] : ref[last];
    const double depth = upper - pts[i][last];
    if (depth > 0.0) volume += depth * hv_recursive(slice, ref, dims - 1);
  }
  return volume;
}

}  // namespace

double hypervolume(const std::vector<std::vector<double>>& points, const std::vector<double>& reference) {
  std::vector<std::vector<double>> inside;
  for (const auto& p : points) {
    if (p.size() != reference.size()) throw InputError("hypervolume: point arity differs from the reference");
    bool ok = true;
    for (std::size_t k = 0; k < p.size(); ++k) ok = ok && std::isfinite(p[k]) && p[k] < reference[k];
    if (ok) inside.push_back(p);
  }
  if (reference.empty()) return 0.0;
  return hv_recursive(std::move(inside), reference, reference.size());
}

void assign_ranks(std::vector<Candidate>& pop) {
  std::vector<ScoreVector> scores;
  for (const auto& c : pop) scores.push_back(c.score);
  const auto fronts = non_dominated_sort(scores);
  for (std::size_t f = 0; f < fronts.size(); ++f) {
    std::vector<ScoreVector> members;
    for (auto i : fronts[f]) members.push_back(scores[i]);
    const auto cd = crowding_distance(members);
    for (std::size_t r = 0; r < fronts[f].size(); ++r) {
      pop[fronts[f][r]].rank = f + 1;
      pop[fronts[f][r]].crowding = cd[r];
    }
  }
  const auto fit = scalarize(scores);
  for (std::size_t i = 0; i < pop.size(); ++i) pop[i].fitness = fit[i];
}

void score_candidates(std::vector<Candidate>& cands, EvolutionState& state, const EvolutionConfig& cfg,
                      const Evaluator& evaluate) {
  // unique genomes not seen before, in first-occurrence order
  std::vector<std::size_t> jobs;
  std::unordered_map<std::uint64_t, std::size_t> first;
  std::vector<std::uint64_t> hashes(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    hashes[i] = genome_hash(cands[i].genome);
    if (state.memo.count(hashes[i]) || first.count(hashes[i])) continue;
    first[hashes[i]] = i;
    jobs.push_back(i);
  }

  std::vector<ScoreVector> results(jobs.size());
  auto work = [&](std::size_t j) {
    const auto& g = cands[jobs[j]].genome;
    try {
      results[j] = evaluate(g, evaluation_seed(cfg.seed, g));
    } catch (const std::exception& e) {
      results[j] = ScoreVector{{}, true, e.what()};
    }
  };
  const std::size_t threads = std::min(cfg.parallelism, jobs.size());
  if (threads <= 1) {
    for (std::size_t j = 0; j < jobs.size(); ++j) work(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) work(j);
      });
    for (auto& th : pool) th.join();
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) state.memo[hashes[jobs[j]]] = results[j];

  for (std::size_t i = 0; i < cands.size(); ++i) {
    cands[i].score = state.memo.at(hashes[i]);
    auto it = first.find(hashes[i]);
    cands[i].cached = it == first.end() || it->second != i;
  }
}

namespace {

void emit(EvolutionState& state, std::vector<HistoryRecord> records, const GenerationHook& hook) {
  for (auto& r : records) state.history.push_back(r);
  if (hook) hook(state, records);
}

std::vector<HistoryRecord> population_records(const EvolutionState& state) {
  std::vector<HistoryRecord> out;
  for (std::size_t i = 0; i < state.population.size(); ++i)
    out.push_back({state.generation, i, state.population[i], true});
  return out;
}

// Indices of the `count` best candidates by scalarized fitness, ties uniform.
std::vector<std::size_t> elite_indices(const std::vector<Candidate>& pop, std::size_t count, Rng& rng) {
  auto idx = order_by(pop.size(), rng, [&](std::size_t a, std::size_t b) { return pop[a].fitness < pop[b].fitness; });
  idx.resize(std::min(count, idx.size()));
  return idx;
}

std::function<bool(std::size_t, std::size_t)> comparator(const std::vector<Candidate>& pop, Algorithm alg) {
  if (alg == Algorithm::NSGA2)
    return [&pop](std::size_t a, std::size_t b) { return nsga_better(pop[a], pop[b]); };
  return [&pop](std::size_t a, std::size_t b) { return pop[a].fitness < pop[b].fitness; };
}

std::vector<Candidate> breed(const EvolutionState& state, const EvolutionConfig& cfg, const OptionPool& pool,
                             std::size_t count, Rng& rng) {
  const auto& pop = state.population;
  const auto better = comparator(pop, cfg.algorithm);
  std::vector<Candidate> kids;
  while (kids.size() < count) {
    const auto a = tournament_select(pop.size(), cfg.tournament, rng, better);
    const auto b = tournament_select(pop.size(), cfg.tournament, rng, better);
    auto [c1, c2] = crossover(pop[a].genome, pop[b].genome, cfg.crossover_points, pool, rng);
    for (auto* c : {&c1, &c2}) {
      if (kids.size() == count) break;
      Candidate k;
      k.genome = mutate(*c, cfg.mutation_rate, pool, rng);
      kids.push_back(std::move(k));
    }
  }
  return kids;
}

std::vector<Candidate> firefly(const EvolutionState& state, const EvolutionConfig& cfg, const OptionPool& pool,
                               const std::vector<std::size_t>& movers, Rng& rng) {
  const auto& pop = state.population;
  std::vector<double> intensity(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) intensity[i] = 1.0 / (1.0 + pop[i].fitness);
  std::vector<Candidate> kids;
  for (auto i : movers) {
    BackboneGenome g = pop[i].genome;
    for (std::size_t j = 0; j < pop.size(); ++j) {
      if (j == i) continue;
      const double beta = fa_attraction(intensity[i], intensity[j], class_similarity(g, pop[j].genome), cfg.fa_beta0,
                                        cfg.fa_gamma);
      g = fa_move(g, pop[j].genome, beta, rng);
    }
    g = repair(std::move(g), pool, rng);
    Candidate k;
    k.genome = mutate(g, cfg.mutation_rate, pool, rng);
    kids.push_back(std::move(k));
  }
  return kids;
}

}  // namespace

EvolutionState initialize(const EvolutionConfig& cfg, const Evaluator& evaluate, std::vector<BackboneGenome> seeds,
                          const GenerationHook& hook) {
  cfg.check();
  if (seeds.size() != cfg.population)
    throw ConfigError("seed population has " + std::to_string(seeds.size()) + " genomes, expected " +
                      std::to_string(cfg.population));
  EvolutionState state;
  state.rng = Rng(cfg.seed, 0x65766f6c7665);
  for (auto& g : seeds) {
    Candidate c;
    c.genome = std::move(g);
    state.population.push_back(std::move(c));
  }
  score_candidates(state.population, state, cfg, evaluate);
  assign_ranks(state.population);
  emit(state, population_records(state), hook);
  return state;
}

void step(EvolutionState& state, const EvolutionConfig& cfg, const Evaluator& evaluate, const OptionPool& pool,
          const GenerationHook& hook) {
  cfg.check();
  Rng& rng = state.rng;
  const std::size_t n = state.population.size();
  const std::size_t generation = state.generation + 1;
  std::vector<HistoryRecord> dropped;

  if (cfg.algorithm == Algorithm::NSGA2) {
    auto kids = breed(state, cfg, pool, n - cfg.elites, rng);
    score_candidates(kids, state, cfg, evaluate);
    // (mu + lambda): parents first, then offspring
    std::vector<Candidate> all = state.population;
    for (auto& c : all) c.cached = true;
    const std::size_t parents = all.size();
    for (auto& k : kids) all.push_back(k);
    std::vector<ScoreVector> scores;
    for (const auto& c : all) scores.push_back(c.score);
    const auto fronts = non_dominated_sort(scores);
    std::vector<std::size_t> keep;
    for (const auto& front : fronts) {
      if (keep.size() + front.size() <= n) {
        keep.insert(keep.end(), front.begin(), front.end());
        continue;
      }
      std::vector<ScoreVector> members;
      for (auto i : front) members.push_back(scores[i]);
      const auto cd = crowding_distance(members);
      const auto order = order_by(front.size(), rng, [&](std::size_t a, std::size_t b) { return cd[a] > cd[b]; });
      for (std::size_t r = 0; keep.size() < n; ++r) keep.push_back(front[order[r]]);
      break;
    }
    std::vector<bool> kept(all.size(), false);
    for (auto i : keep) kept[i] = true;
    std::vector<Candidate> next;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (kept[i]) next.push_back(all[i]);
    state.population = std::move(next);
    // ranks of dropped offspring relative to the union they competed in
    std::vector<Candidate> ranked_all = all;
    assign_ranks(ranked_all);
    for (std::size_t i = parents, d = 0; i < all.size(); ++i)
      if (!kept[i]) dropped.push_back({generation, d++, ranked_all[i], false});
  } else {
    const auto elites = elite_indices(state.population, cfg.elites, rng);
    std::vector<Candidate> next;
    for (auto i : elites) {
      next.push_back(state.population[i]);
      next.back().cached = true;
    }
    std::vector<Candidate> kids;
    if (cfg.algorithm == Algorithm::GA) {
      kids = breed(state, cfg, pool, n - elites.size(), rng);
    } else {
      std::vector<bool> is_elite(n, false);
      for (auto i : elites) is_elite[i] = true;
      std::vector<std::size_t> movers;
      for (std::size_t i = 0; i < n; ++i)
        if (!is_elite[i]) movers.push_back(i);
      kids = firefly(state, cfg, pool, movers, rng);
    }
    score_candidates(kids, state, cfg, evaluate);
    for (auto& k : kids) next.push_back(std::move(k));
    state.population = std::move(next);
  }

  assign_ranks(state.population);
  state.generation = generation;
  auto records = population_records(state);
  for (auto& d : dropped) {
    d.index = records.size();
    records.push_back(d);
  }
  emit(state, std::move(records), hook);
}

void run_to_end(EvolutionState& state, const EvolutionConfig& cfg, const Evaluator& evaluate, const OptionPool& pool,
                const GenerationHook& hook) {
  while (state.generation < cfg.generations) step(state, cfg, evaluate, pool, hook);
}

EvolutionState run(const EvolutionConfig& cfg, const Evaluator& evaluate, const OptionPool& pool,
                   std::vector<BackboneGenome> seeds, const GenerationHook& hook) {
  auto state = initialize(cfg, evaluate, std::move(seeds), hook);
  run_to_end(state, cfg, evaluate, pool, hook);
  return state;
}

}  // namespace livsynth
