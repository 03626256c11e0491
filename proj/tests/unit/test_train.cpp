#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <unordered_set>

#include "livsynth/errors.hpp"
#include "livsynth/train.hpp"

using namespace livsynth;
using grad::Tensor;

namespace {

const OptionPool& pool() { return OptionPool::standard(); }

CompileDims tiny_dims(int width, int vocab, int seq) {
  CompileDims d;
  d.width = width;
  d.vocab = vocab;
  d.seq_len = seq;
  d.head_dim = 4;
  return d;
}

std::string key_of(const std::vector<int>& v) {
  std::string s;
  for (int t : v) s += std::to_string(t) + ",";
  return s;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  cfg.warmup_steps = 10;
  cfg.total_steps = 100;
  CHECK(lr_at(0, cfg) == 0.0);
  CHECK(lr_at(10, cfg) == doctest::Approx(0.0008));
  CHECK(lr_at(5, cfg) == doctest::Approx(0.0004));
  CHECK(lr_at(100, cfg) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lr_at(55, cfg) == doctest::Approx(0.0004));
  for (std::size_t s = 11; s <= 100; ++s) CHECK(lr_at(s, cfg) <= lr_at(s - 1, cfg));
  TrainConfig bad;
  bad.warmup_steps = 0;
  CHECK_THROWS_AS(bad.check(), ConfigError);
  bad.warmup_steps = 400;
  CHECK_THROWS_AS(bad.check(), ConfigError);
  TrainConfig none;
  none.total_steps = 0;
  CHECK_NOTHROW(none.check());
}

TEST_CASE("optimizer defaults") {
  TrainConfig cfg;
  CHECK(cfg.peak_lr == 0.0008);
  CHECK(cfg.beta1 == 0.9);
  CHECK(cfg.beta2 == 0.95);
  CHECK(cfg.weight_decay == 0.1);
  CHECK(cfg.grad_clip_norm == 1.0);
}

TEST_CASE("zero gradient and zero decay leave parameters unchanged") {
  ParameterStore ps;
  ps.add("w", 2, 2, {1.0, -2.0, 3.0, 0.5});
  ps.zero_grad();
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  AdamState st;
  adam_step(ps, st, cfg, 0.1);
  const auto v = ps.get("w").values();
  CHECK(v[0] == 1.0);
  CHECK(v[1] == -2.0);
  CHECK(v[2] == 3.0);
  CHECK(v[3] == 0.5);
}

TEST_CASE("first AdamW step matches a hand calculation") {
  // m = 0.1 g, v = 0.05 g^2; bias correction gives mhat = g, vhat = g^2, so the step is lr * sign(g).
  // p1 = 1 - 0.1 * (1 + 0.1 * 1) = 0.89, p2 = -2 - 0.1 * (-1 + 0.1 * -2) = -1.88.
  ParameterStore ps;
  auto w = ps.add("w", 1, 2, {1.0, -2.0});
  sum(multiply(w, Tensor::constant(1, 2, {0.5, -0.25}))).backward();
  TrainConfig cfg;
  AdamState st;
  adam_step(ps, st, cfg, 0.1);
  CHECK(ps.get("w").values()[0] == doctest::Approx(0.89).epsilon(1e-7));
  CHECK(ps.get("w").values()[1] == doctest::Approx(-1.88).epsilon(1e-7));
  // No decay on tensors flagged as such.
  ParameterStore q;
  auto s = q.add("s", 1, 1, {2.0}, false);
  sum(scale(s, 0.3)).backward();
  AdamState st2;
  adam_step(q, st2, cfg, 0.1);
  CHECK(q.get("s").values()[0] == doctest::Approx(1.9).epsilon(1e-7));
}

TEST_CASE("clipping bounds the global norm") {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    ParameterStore ps;
    auto a = ps.add("a", 3, 3, std::vector<double>(9, 0.0));
    auto b = ps.add("b", 1, 4, std::vector<double>(4, 0.0));
    std::vector<double> ga(9), gb(4);
    for (auto& x : ga) x = 10 * rng.normal();
    for (auto& x : gb) x = 10 * rng.normal();
    sum(add(sum(multiply(a, Tensor::constant(3, 3, ga))), sum(multiply(b, Tensor::constant(1, 4, gb))))).backward();
    const double before = global_grad_norm(ps);
    const double clip = 0.1 + rng.uniform();
    CHECK(clip_gradients(ps, clip) == doctest::Approx(before));
    CHECK(global_grad_norm(ps) <= clip + 1e-9);
  }
}

TEST_CASE("full-model gradient matches finite differences") {
  const auto g = parse_genome("11111-51111-71111-91111", 8);
  auto dims = tiny_dims(8, 11, 12);
  dims.init_std = 0.3;
  auto model = compile(g, dims, pool(), 3);
  Rng rng(4);
  std::vector<int> tokens(10), targets(10);
  for (auto& t : tokens) t = static_cast<int>(rng.index(11));
  for (auto& t : targets) t = static_cast<int>(rng.index(11));
  auto loss = [&] { return grad::cross_entropy(model.forward(tokens), targets).item(); };
  model.parameters().zero_grad();
  grad::cross_entropy(model.forward(tokens), targets).backward();
  const double h = 1e-5;
  for (auto& e : model.parameters().entries()) {
    const std::vector<double> analytic(e.tensor.grad().begin(), e.tensor.grad().end());
    auto vals = e.tensor.mutable_values();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + h;
      const double fp = loss();
      vals[i] = keep - h;
      const double fm = loss();
      vals[i] = keep;
      const double fd = (fp - fm) / (2 * h);
      num += (fd - analytic[i]) * (fd - analytic[i]);
      den += fd * fd;
    }
    CHECK_MESSAGE(std::sqrt(num) <= 1e-3 * std::max(std::sqrt(den), 1e-10), e.key);
  }
}

TEST_CASE("tasks are deterministic and evaluation sets are disjoint from training") {
  for (auto kind : {TaskKind::Copy, TaskKind::AssociativeRecall}) {
    TaskSpec s;
    s.kind = kind;
    s.seq_len = 16;
    s.vocab = 4;
    s.pairs = 2;
    s.train_size = 300;
    s.eval_size = 40;
    Task a(s), b(s);
    std::unordered_set<std::string> train;
    for (std::size_t i = 0; i < s.train_size; ++i) {
      CHECK(a.train_example(i).tokens == b.train_example(i).tokens);
      train.insert(key_of(a.train_example(i).tokens));
    }
    for (const auto& e : a.eval_set()) CHECK(train.count(key_of(e.tokens)) == 0);
    s.eval_split = 1;
    Task c(s);
    std::unordered_set<std::string> eval0;
    for (const auto& e : a.eval_set()) eval0.insert(key_of(e.tokens));
    int overlap = 0;
    for (const auto& e : c.eval_set()) overlap += eval0.count(key_of(e.tokens));
    CHECK(overlap < 40);
    const auto b1 = a.train_batch(3, 5, 9), b2 = b.train_batch(3, 5, 9);
    for (std::size_t i = 0; i < 5; ++i) CHECK(b1[i].tokens == b2[i].tokens);
  }
}

TEST_CASE("associative recall layout") {
  TaskSpec s;
  s.kind = TaskKind::AssociativeRecall;
  s.seq_len = 20;
  s.pairs = 3;
  Task t(s);
  const auto e = t.train_example(7);
  std::map<int, int> kv;
  for (int k = 0; k < 3; ++k) {
    CHECK(e.tokens[2 * k] < 16);
    CHECK(e.tokens[2 * k + 1] >= 16);
    kv[e.tokens[2 * k]] = e.tokens[2 * k + 1];
  }
  int scored = 0;
  for (std::size_t i = 0; i < 20; ++i)
    if (e.weights[i] > 0) {
      ++scored;
      CHECK(kv.at(e.tokens[i]) == e.targets[i]);
      CHECK(e.tokens[i + 1] == e.targets[i]);
    }
  CHECK(scored == 7);
}

TEST_CASE("copy layout") {
  TaskSpec s;
  s.kind = TaskKind::Copy;
  s.seq_len = 10;
  Task t(s);
  const auto e = t.train_example(0);
  for (std::size_t i = 5; i < 10; ++i) CHECK(e.tokens[i] == e.tokens[i - 5]);
  for (std::size_t i = 0; i + 1 < 10; ++i) CHECK(e.targets[i] == e.tokens[i + 1]);
  CHECK(e.weights[3] == 0.0);
  CHECK(e.weights[4] == 1.0);
  CHECK(e.weights[9] == 0.0);
}

TEST_CASE("tiny language-model task reads the bundled corpus") {
  TaskSpec s;
  s.kind = TaskKind::TinyLm;
  s.seq_len = 32;
  s.eval_size = 8;
  s.corpus_path = LIVSYNTH_DATA_DIR "/tiny_corpus.txt";
  Task t(s);
  CHECK(t.eval_set().size() == 8);
  const auto e = t.train_example(3);
  for (std::size_t i = 0; i + 1 < 32; ++i) CHECK(e.targets[i] == e.tokens[i + 1]);
  for (int tok : e.tokens) CHECK((tok >= 0 && tok < 32));
  s.corpus_path = "/nonexistent/file.txt";
  CHECK_THROWS_AS(Task{s}, ConfigError);
}

TEST_CASE("untrained loss is near the uniform baseline") {
  TaskSpec s;
  s.kind = TaskKind::Copy;
  s.seq_len = 32;
  s.eval_size = 16;
  Task t(s);
  auto model = compile(striped_hybrid(2, 32, classes::kSA1), tiny_dims(32, 32, 32), pool(), 1);
  CHECK(std::abs(evaluate_loss(model, t.eval_set()) - std::log(32.0)) < 0.05);
}

TEST_CASE("zero steps returns the initial evaluation loss") {
  TaskSpec s;
  s.kind = TaskKind::Copy;
  s.seq_len = 16;
  s.eval_size = 8;
  Task t(s);
  auto model = compile(striped_hybrid(2, 16, classes::kGConv1), tiny_dims(16, 32, 16), pool(), 1);
  TrainConfig cfg;
  cfg.total_steps = 0;
  const auto r = train(model, t, cfg);
  CHECK(r.losses.empty());
  CHECK(r.eval_loss == r.initial_eval_loss);
}

TEST_CASE("training lowers the copy loss and is deterministic") {
  TaskSpec s;
  s.kind = TaskKind::Copy;
  s.seq_len = 16;
  s.vocab = 8;
  s.eval_size = 16;
  Task t(s);
  TrainConfig cfg;
  cfg.total_steps = 200;
  cfg.warmup_steps = 20;
  cfg.peak_lr = 0.01;
  cfg.batch = 4;
  const auto g = striped_hybrid(4, 16, classes::kSA1);
  auto m1 = compile(g, tiny_dims(16, 8, 16), pool(), 5);
  auto m2 = compile(g, tiny_dims(16, 8, 16), pool(), 5);
  const auto r1 = train(m1, t, cfg);
  const auto r2 = train(m2, t, cfg);
  CHECK(r1.eval_loss < r1.initial_eval_loss);
  REQUIRE(r1.losses.size() == 200);
  CHECK(r1.losses == r2.losses);
  CHECK(r1.eval_loss == r2.eval_loss);
}

TEST_CASE("single-pair associative recall is solved by attention") {
  TaskSpec s;
  s.kind = TaskKind::AssociativeRecall;
  s.pairs = 1;
  s.seq_len = 16;
  s.train_size = 192;  // only 256 distinct sequences exist
  s.eval_size = 32;
  Task t(s);
  TrainConfig cfg;
  cfg.total_steps = 500;
  cfg.warmup_steps = 50;
  cfg.peak_lr = 0.01;
  cfg.batch = 4;
  auto model = compile(striped_hybrid(2, 32, classes::kSA1), tiny_dims(32, 32, 16), pool(), 2);
  const auto r = train(model, t, cfg);
  CHECK(r.eval_loss < 0.1);
}

TEST_CASE("non-finite values surface as divergence") {
  TaskSpec s;
  s.kind = TaskKind::Copy;
  s.seq_len = 16;
  s.eval_size = 4;
  Task t(s);
  auto model = compile(striped_hybrid(2, 16, classes::kRec1), tiny_dims(16, 32, 16), pool(), 1);
  model.parameters().get("liv1.b0.out").mutable_values()[3] = INFINITY;
  TrainConfig cfg;
  cfg.total_steps = 10;
  cfg.warmup_steps = 2;
  try {
    train(model, t, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.step() == 0);
  }
}
