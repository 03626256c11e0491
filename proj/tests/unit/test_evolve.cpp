#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "livsynth/errors.hpp"
#include "livsynth/evolve.hpp"

using namespace livsynth;

namespace {

const OptionPool& pool() { return OptionPool::standard(); }

ScoreVector sv(std::vector<double> v) { return ScoreVector{std::move(v), false, ""}; }

std::vector<ScoreVector> random_scores(std::size_t n, std::size_t m, Rng& rng, bool ties) {
  std::vector<ScoreVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v;
    for (std::size_t k = 0; k < m; ++k) v.push_back(ties ? static_cast<double>(rng.uniform_int(0, 4)) : rng.uniform());
    out.push_back(sv(v));
  }
  return out;
}

// Static size/cache evaluator used by the evolution tests.
Evaluator static_evaluator() {
  return [](const BackboneGenome& g, std::uint64_t) {
    CompileDims d;
    const auto r = analyze(g, d, pool(), 4096, 2);
    return sv({static_cast<double>(r.parameter_count), static_cast<double>(r.cache_bytes)});
  };
}

std::vector<BackboneGenome> seeds(std::size_t n, std::size_t depth, std::uint64_t seed) {
  Rng rng(seed);
  return seed_population(n, depth, 32, pool(), rng, 0.25);
}

EvolutionConfig nsga_config() {
  EvolutionConfig c;
  c.population = 16;
  c.generations = 10;
  c.seed = 42;
  return c;
}

std::vector<std::vector<double>> front_points(const std::vector<Candidate>& pop) {
  std::vector<std::vector<double>> pts;
  for (const auto& c : pop)
    if (c.rank == 1 && !c.score.diverged) pts.push_back(c.score.values);
  return pts;
}

}  // namespace

TEST_CASE("normalize") {
  const auto u = normalize({2, 4, 6});
  CHECK(u == std::vector<double>{0, 0.5, 1});
  CHECK(normalize({5, 5, 5}) == std::vector<double>{0, 0, 0});
  CHECK(normalize({}).empty());
}

TEST_CASE("dominance") {
  CHECK(dominates(sv({1, 1}), sv({1, 2})));
  CHECK_FALSE(dominates(sv({1, 2}), sv({1, 2})));
  CHECK_FALSE(dominates(sv({1, 2}), sv({2, 1})));
  ScoreVector bad{{INFINITY, 0}, true, "x"};
  CHECK(dominates(sv({1e30, 1e30}), bad));
  CHECK_FALSE(dominates(bad, sv({1e30, 1e30})));
  CHECK_FALSE(dominates(bad, bad));
}

TEST_CASE("non-dominated sort worked example") {
  const auto f = non_dominated_sort({sv({1, 1}), sv({1, 2}), sv({2, 1}), sv({2, 2})});
  REQUIRE(f.size() == 3);
  CHECK(f[0] == std::vector<std::size_t>{0});
  CHECK(f[1] == std::vector<std::size_t>{1, 2});
  CHECK(f[2] == std::vector<std::size_t>{3});
}

TEST_CASE("single objective fronts group equal values in sorted order") {
  const auto f = non_dominated_sort({sv({3}), sv({1}), sv({2}), sv({1})});
  REQUIRE(f.size() == 3);
  CHECK(f[0] == std::vector<std::size_t>{1, 3});
  CHECK(f[1] == std::vector<std::size_t>{2});
  CHECK(f[2] == std::vector<std::size_t>{0});
}

TEST_CASE("fronts on random sets: mutual non-domination and completeness") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + trial % 2;
    const auto scores = random_scores(1 + rng.index(50), m, rng, trial % 3 == 0);
    const auto fronts = non_dominated_sort(scores);
    std::set<std::size_t> seen;
    for (std::size_t f = 0; f < fronts.size(); ++f) {
      for (auto i : fronts[f]) {
        CHECK(seen.insert(i).second);
        for (auto j : fronts[f]) CHECK_FALSE(dominates(scores[i], scores[j]));
        // something in the previous front dominates every later member
        if (f > 0) {
          bool covered = false;
          for (auto j : fronts[f - 1]) covered = covered || dominates(scores[j], scores[i]);
          CHECK(covered);
        }
      }
    }
    CHECK(seen.size() == scores.size());
    // brute force: front 1 is exactly the non-dominated set
    std::set<std::size_t> nd;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      bool dominated = false;
      for (std::size_t j = 0; j < scores.size(); ++j) dominated = dominated || dominates(scores[j], scores[i]);
      if (!dominated) nd.insert(i);
    }
    CHECK(nd == std::set<std::size_t>(fronts[0].begin(), fronts[0].end()));
  }
}

TEST_CASE("crowding distance worked examples") {
  auto two = crowding_distance({sv({0, 1}), sv({1, 0})});
  CHECK(std::isinf(two[0]));
  CHECK(std::isinf(two[1]));
  auto one = crowding_distance({sv({0}), sv({5}), sv({10})});
  CHECK(std::isinf(one[0]));
  CHECK(one[1] == doctest::Approx(1.0));
  CHECK(std::isinf(one[2]));
  auto d2 = crowding_distance({sv({0, 10}), sv({5, 5}), sv({10, 0})});
  CHECK(std::isinf(d2[0]));
  CHECK(d2[1] == doctest::Approx(2.0));
  CHECK(std::isinf(d2[2]));
  auto flat = crowding_distance({sv({1, 0}), sv({1, 5}), sv({1, 10})});
  CHECK(flat[1] == doctest::Approx(1.0));  // constant objective contributes nothing
}

TEST_CASE("crowding distances are infinite at boundaries, finite and nonnegative inside") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto scores = random_scores(3 + rng.index(30), 2 + trial % 2, rng, false);
    const auto front = non_dominated_sort(scores)[0];
    std::vector<ScoreVector> members;
    for (auto i : front) members.push_back(scores[i]);
    const auto cd = crowding_distance(members);
    std::size_t infinite = 0;
    for (double d : cd) {
      CHECK(d >= 0.0);
      if (std::isinf(d)) ++infinite;
    }
    CHECK(infinite >= std::min<std::size_t>(2, members.size()));
    CHECK(infinite <= 2 * members.front().values.size());
  }
}

TEST_CASE("firefly attraction") {
  CHECK(fa_attraction(0.1, 0.9, 1.0, 1.0, 1.0) == 0.0);
  CHECK(fa_attraction(0.1, 0.9, 0.0, 1.0, 1.0) == doctest::Approx(0.6321).epsilon(1e-4));
  CHECK(fa_attraction(0.9, 0.1, 0.0, 1.0, 1.0) == 0.0);
  CHECK(fa_attraction(0.5, 0.5, 0.0, 1.0, 1.0) == 0.0);
  CHECK(fa_attraction(0.1, 0.9, 0.5, 2.0, 3.0) == doctest::Approx(2.0 * (1 - std::exp(-1.5))));

  const auto a = parse_genome("11111-91111-51111");
  const auto b = parse_genome("71111-91111-11111");
  CHECK(class_similarity(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(class_similarity(a, a) == 1.0);
  Rng rng(1);
  CHECK(fa_move(a, b, 0.0, rng) == a);
  CHECK(fa_move(a, b, 1.0, rng) == b);
}

TEST_CASE("GA scalarization is the sum of normalized objectives") {
  // loss, params
  const std::vector<ScoreVector> s{sv({2.0, 300}), sv({3.0, 100}), sv({4.0, 200})};
  const auto f = scalarize(s);
  const auto ul = normalize({2.0, 3.0, 4.0});
  const auto up = normalize({300, 100, 200});
  for (int i = 0; i < 3; ++i) CHECK(f[i] == doctest::Approx(ul[i] + up[i]));
  CHECK(f[0] == doctest::Approx(1.0));
  CHECK(f[1] == doctest::Approx(0.5));
  CHECK(f[2] == doctest::Approx(1.5));

  const auto g = scalarize({sv({1, 1}), ScoreVector{{INFINITY, 5}, true, ""}, sv({3, 1})});
  CHECK(std::isinf(g[1]));
  CHECK(g[0] == 0.0);
  CHECK(g[2] == 1.0);
}

TEST_CASE("tournament selection") {
  const std::vector<double> fit{5, 3, 9, 1, 7, 4, 8, 6};
  auto better = [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; };
  Rng rng(5);
  for (int i = 0; i < 100; ++i) CHECK(tournament_select(fit.size(), fit.size(), rng, better) == 3);

  std::vector<int> counts(fit.size(), 0);
  for (int i = 0; i < 10000; ++i) ++counts[tournament_select(fit.size(), 1, rng, better)];
  for (int c : counts) CHECK(std::abs(c - 1250) < 200);

  int best = 0;
  for (int i = 0; i < 10000; ++i) best += tournament_select(fit.size(), 2, rng, better) == 3;
  CHECK(best > 10000 / 8);
  CHECK(best == doctest::Approx(10000 * 2.0 / 8).epsilon(0.1));  // 1 - C(7,2)/C(8,2)

  // all tied: winner uniform
  std::fill(counts.begin(), counts.end(), 0);
  auto none = [](std::size_t, std::size_t) { return false; };
  for (int i = 0; i < 8000; ++i) ++counts[tournament_select(8, 4, rng, none)];
  for (int c : counts) CHECK(std::abs(c - 1000) < 150);
}

TEST_CASE("hypervolume") {
  CHECK(hypervolume({{1, 1}}, {2, 2}) == doctest::Approx(1.0));
  CHECK(hypervolume({{0, 1}, {1, 0}}, {2, 2}) == doctest::Approx(3.0));
  CHECK(hypervolume({{0, 1}, {1, 0}, {1, 1}}, {2, 2}) == doctest::Approx(3.0));
  CHECK(hypervolume({{3, 0}}, {2, 2}) == 0.0);
  CHECK(hypervolume({{0, 0, 0}}, {1, 2, 3}) == doctest::Approx(6.0));
  CHECK(hypervolume({{0, 0, 1}, {1, 1, 0}}, {2, 2, 2}) == doctest::Approx(4.0 + 2.0 - 1.0));  // boxes minus overlap
  // inclusion-exclusion oracle on random 2-D pairs
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> a{rng.uniform(), rng.uniform()}, b{rng.uniform(), rng.uniform()};
    const double va = (1 - a[0]) * (1 - a[1]), vb = (1 - b[0]) * (1 - b[1]);
    const double vab = (1 - std::max(a[0], b[0])) * (1 - std::max(a[1], b[1]));
    CHECK(hypervolume({a, b}, {1, 1}) == doctest::Approx(va + vb - vab));
  }
}

TEST_CASE("config validation and algorithm names") {
  EvolutionConfig c;
  CHECK_NOTHROW(c.check());
  CHECK(c.population == 16);
  CHECK(c.generations == 18);
  CHECK(c.crossover_points == 2);
  CHECK(c.mutation_rate == 0.10);
  CHECK(c.elites == 2);
  c.elites = 16;
  CHECK_THROWS_AS(c.check(), ConfigError);
  c = EvolutionConfig{};
  c.tournament = 17;
  CHECK_THROWS_AS(c.check(), ConfigError);
  for (auto a : {Algorithm::GA, Algorithm::FA, Algorithm::NSGA2}) CHECK(parse_algorithm(algorithm_name(a)) == a);
  CHECK(parse_algorithm("NSGA-2") == Algorithm::NSGA2);
  CHECK_THROWS_AS(parse_algorithm("pso"), ConfigError);
}

TEST_CASE("zero generations scores only the seed population") {
  auto cfg = nsga_config();
  cfg.generations = 0;
  const auto state = run(cfg, static_evaluator(), pool(), seeds(16, 24, 1));
  CHECK(state.generation == 0);
  CHECK(state.history.size() == 16);
  for (const auto& r : state.history) {
    CHECK(r.generation == 0);
    CHECK(r.selected);
  }
}

TEST_CASE("NSGA-2 on size and cache: elitism and hypervolume") {
  const auto cfg = nsga_config();
  std::vector<double> best_size, best_cache;
  std::vector<std::vector<double>> reference;
  std::vector<std::vector<std::vector<double>>> fronts;
  auto hook = [&](const EvolutionState& s, const std::vector<HistoryRecord>&) {
    double bs = INFINITY, bc = INFINITY;
    for (const auto& c : s.population) {
      bs = std::min(bs, c.score.values[0]);
      bc = std::min(bc, c.score.values[1]);
      CHECK(validate(c.genome, pool()).empty());
    }
    best_size.push_back(bs);
    best_cache.push_back(bc);
    fronts.push_back(front_points(s.population));
    // front 1 mutually non-dominated
    for (const auto& a : s.population)
      for (const auto& b : s.population)
        if (a.rank == 1 && b.rank == 1) CHECK_FALSE(dominates(a.score, b.score));
  };
  const auto state = run(cfg, static_evaluator(), pool(), seeds(16, 24, 3), hook);
  REQUIRE(best_size.size() == 11);
  for (std::size_t g = 1; g < best_size.size(); ++g) {
    CHECK(best_size[g] <= best_size[g - 1]);
    CHECK(best_cache[g] <= best_cache[g - 1]);
  }
  double rs = 0, rc = 0;
  for (const auto& r : state.history) {
    rs = std::max(rs, r.candidate.score.values[0]);
    rc = std::max(rc, r.candidate.score.values[1]);
  }
  const std::vector<double> ref{rs * 1.1 + 1, rc * 1.1 + 1};
  CHECK(hypervolume(fronts.back(), ref) >= hypervolume(fronts.front(), ref));
  CHECK(state.population.size() == 16);
}

TEST_CASE("GA and FA keep elites and valid offspring") {
  for (auto alg : {Algorithm::GA, Algorithm::FA}) {
    auto cfg = nsga_config();
    cfg.algorithm = alg;
    cfg.generations = 5;
    std::vector<double> best;
    auto hook = [&](const EvolutionState& s, const std::vector<HistoryRecord>&) {
      double b = INFINITY;
      for (const auto& c : s.population) {
        b = std::min(b, c.score.values[0]);
        CHECK(validate(c.genome, pool()).empty());
      }
      best.push_back(b);
      CHECK(s.population.size() == 16);
    };
    // single objective so the scalarized best is the size best
    Evaluator size_only = [](const BackboneGenome& g, std::uint64_t) {
      CompileDims d;
      return sv({static_cast<double>(analyze(g, d, pool(), 4096, 2).parameter_count)});
    };
    run(cfg, size_only, pool(), seeds(16, 12, 4), hook);
    for (std::size_t g = 1; g < best.size(); ++g) CHECK(best[g] <= best[g - 1]);
  }
}

TEST_CASE("identical seeds give identical histories; memo marks repeats") {
  auto cfg = nsga_config();
  cfg.generations = 4;
  std::size_t calls = 0;
  Evaluator counted = [&](const BackboneGenome& g, std::uint64_t s) {
    ++calls;
    return static_evaluator()(g, s);
  };
  const auto a = run(cfg, counted, pool(), seeds(16, 24, 5));
  const std::size_t first_calls = calls;
  cfg.parallelism = 4;
  const auto b = run(cfg, static_evaluator(), pool(), seeds(16, 24, 5));
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].generation == b.history[i].generation);
    CHECK(a.history[i].candidate.genome == b.history[i].candidate.genome);
    CHECK(a.history[i].candidate.score == b.history[i].candidate.score);
    CHECK(a.history[i].candidate.cached == b.history[i].candidate.cached);
  }
  std::size_t fresh = 0;
  for (const auto& r : a.history) fresh += !r.candidate.cached;
  CHECK(fresh == first_calls);
  CHECK(a.memo.size() == first_calls);
}

TEST_CASE("resuming from a saved state matches an uninterrupted run") {
  auto cfg = nsga_config();
  cfg.generations = 6;
  const auto full = run(cfg, static_evaluator(), pool(), seeds(16, 24, 8));
  auto partial_cfg = cfg;
  partial_cfg.generations = 3;
  auto mid = run(partial_cfg, static_evaluator(), pool(), seeds(16, 24, 8));
  EvolutionState copy = mid;
  copy.rng.restore(mid.rng.save());
  run_to_end(copy, cfg, static_evaluator(), pool());
  REQUIRE(copy.history.size() == full.history.size());
  for (std::size_t i = 0; i < full.history.size(); ++i) {
    CHECK(copy.history[i].candidate.genome == full.history[i].candidate.genome);
    CHECK(copy.history[i].candidate.score == full.history[i].candidate.score);
  }
}

TEST_CASE("evaluator exceptions become diverged candidates") {
  auto cfg = nsga_config();
  cfg.generations = 2;
  Evaluator flaky = [](const BackboneGenome& g, std::uint64_t s) -> ScoreVector {
    if (g.genes[0].liv_class == classes::kSA1) throw std::runtime_error("boom");
    return static_evaluator()(g, s);
  };
  const auto state = run(cfg, flaky, pool(), seeds(16, 24, 2));
  bool saw = false;
  for (const auto& r : state.history)
    if (r.candidate.score.diverged) {
      saw = true;
      CHECK(r.candidate.score.note == "boom");
    }
  CHECK(saw);
  for (const auto& c : state.population)
    if (c.score.diverged) CHECK(c.rank > 1);
}
