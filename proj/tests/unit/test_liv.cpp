#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "livsynth/errors.hpp"
#include "livsynth/liv.hpp"

using namespace livsynth;
using grad::Tensor;

namespace {

const OptionPool& pool() { return OptionPool::standard(); }

CompileDims small_dims(int width = 8, int seq = 16) {
  CompileDims d;
  d.width = width;
  d.seq_len = seq;
  d.head_dim = 4;
  d.vocab = 11;
  d.mlp_hidden = 12;
  d.init_std = 0.4;
  return d;
}

BackboneGenome single(int cls, int width = 8) {
  BackboneGenome g;
  g.width = width;
  g.genes = {LivGene{cls, 1, 1, 1, 1}};
  return g;
}

Tensor random_input(std::size_t len, std::size_t width, Rng& rng) {
  std::vector<double> v(len * width);
  for (auto& x : v) x = rng.normal();
  return Tensor::constant(len, width, std::move(v));
}

double rel_err(std::span<const double> a, std::span<const double> b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / std::max(den, 1e-300));
}

// Pool extended with attention variants the standard pool does not contain.
OptionPool extended_pool() {
  OptionPool p = pool();
  auto add = [&](int id, const char* name, Nonlinearity nl, Sparsity sp, ChannelMixing cm) {
    p.add_class({id, name, OperatorGenome{1, TokenMixing::LowRank, sp, nl, cm, false}, {"K", "V"}, 0});
  };
  add(18, "LinAttn", Nonlinearity::None, Sparsity::None, ChannelMixing::Grouped);
  add(19, "BandSA", Nonlinearity::Softmax, Sparsity::Banded, ChannelMixing::Grouped);
  add(20, "ReluAttn", Nonlinearity::Relu, Sparsity::None, ChannelMixing::Dense);
  add(21, "SwishAttn", Nonlinearity::Swish, Sparsity::None, ChannelMixing::Diagonal);
  add(22, "BandLin", Nonlinearity::None, Sparsity::Banded, ChannelMixing::Grouped);
  return p;
}

}  // namespace

TEST_CASE("fast path equals the dense oracle for every class") {
  const auto ext = extended_pool();
  Rng rng(1);
  for (int cls : ext.class_ids()) {
    const auto model = compile(single(cls), small_dims(), ext, 100 + cls);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t len = 1 + rng.index(16);
      const auto x = random_input(len, 8, rng);
      const auto groups = model.featurize(0, x);
      const auto y = model.apply_structured(0, groups, x);
      const auto T = model.materialize_dense(0, groups, len);
      const auto ref = T.apply(x.values());
      CHECK_MESSAGE(rel_err(y.values(), ref) < 1e-5, "class " << cls << " len " << len);
    }
  }
}

TEST_CASE("dense operators are causal; memoryless operators are diagonal in time") {
  Rng rng(2);
  for (int cls : pool().class_ids()) {
    const auto model = compile(single(cls), small_dims(), pool(), 7);
    const auto x = random_input(10, 8, rng);
    const auto T = model.materialize_dense(0, model.featurize(0, x), 10);
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j)
        for (std::size_t o = 0; o < 8; ++o)
          for (std::size_t b = 0; b < 8; ++b) {
            if (j > i) CHECK(T.at(i, j, o, b) == 0.0);
            if (model.instance(0).kind == StructureKind::Memoryless && j != i) CHECK(T.at(i, j, o, b) == 0.0);
          }
  }
}

TEST_CASE("convolution with unit scalings is Toeplitz") {
  Rng rng(3);
  const auto model = compile(single(classes::kGConv2), small_dims(), pool(), 3);
  const auto x = random_input(12, 8, rng);
  auto groups = model.featurize(0, x);
  for (auto& g : groups)
    if (g.role != "kernel") g.values = Tensor::filled(12, 8, 1.0);
  const auto T = model.materialize_dense(0, groups, 12);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      for (std::size_t c = 0; c < 8; ++c) CHECK(T.at(i, j, c, c) == T.at(i - j, 0, c, c));
}

TEST_CASE("oracle refuses long sequences") {
  Rng rng(4);
  auto dims = small_dims();
  dims.seq_len = 64;
  const auto model = compile(single(classes::kSA1), dims, pool(), 1);
  const auto x = random_input(33, 8, rng);
  CHECK_THROWS_AS(model.materialize_dense(0, model.featurize(0, x), 33), InputError);
}

TEST_CASE("forward is causal for every class") {
  Rng rng(5);
  for (int cls : pool().class_ids()) {
    BackboneGenome g;
    g.width = 8;
    g.genes = {LivGene{cls, 1, 1, 1, 1}, LivGene{classes::kGMemless, 1, 1, 1, 1}};
    if (cls == classes::kGMemless) g.genes[1] = LivGene{9, 2, 1, 2, 1};
    const auto model = compile(g, small_dims(), pool(), 11);
    std::vector<int> tokens(16);
    for (auto& t : tokens) t = static_cast<int>(rng.index(11));
    const auto base = model.forward(tokens);
    for (std::size_t j : {0u, 5u, 15u}) {
      auto other = tokens;
      other[j] = (other[j] + 1) % 11;
      const auto pert = model.forward(other);
      bool same_before = true, changed_after = false;
      for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t v = 0; v < 11; ++v) {
          if (i < j && pert.at(i, v) != base.at(i, v)) same_before = false;
          if (i >= j && pert.at(i, v) != base.at(i, v)) changed_after = true;
        }
      CHECK_MESSAGE(same_before, "class " << cls << " position " << j);
      CHECK(changed_after);
    }
  }
}

TEST_CASE("worked example binds and routes as described") {
  const auto model = compile(parse_genome("21211-31112-21221-32112", 8), small_dims(), pool(), 1);
  CHECK(model.instance(0).featurizer_binding == model.instance(2).featurizer_binding);
  CHECK(model.instance(1).featurizer_binding != model.instance(3).featurizer_binding);
  CHECK(model.instance(3).routed.size() == 1);
  CHECK(model.instance(3).routed.at("K") == 1);
  CHECK(model.instance(1).routed.empty());
  CHECK(model.featurizer_bindings().size() == 3);
  std::vector<int> tokens{1, 2, 3, 4, 5};
  CHECK(model.forward(tokens).all_finite());
}

TEST_CASE("no sharing means no shared bindings and no routes") {
  Rng rng(6);
  const auto g = striped_hybrid(6, 8, classes::kRec1);
  const auto model = compile(g, small_dims(), pool(), 1);
  CHECK(model.featurizer_bindings().size() == 6);
  for (const auto& inst : model.instances()) CHECK(inst.routed.empty());
}

TEST_CASE("featurizer sharing saves exactly one featurizer") {
  const std::vector<std::string> excl{"embed", "head"};
  for (int cls : pool().class_ids()) {
    BackboneGenome shared, severed;
    shared.width = severed.width = 8;
    shared.genes = {LivGene{cls, 1, 2, 1, 1}, LivGene{cls, 1, 2, 2, 1}};
    severed.genes = {LivGene{cls, 1, 1, 1, 1}, LivGene{cls, 2, 1, 2, 1}};
    const auto a = compile(shared, small_dims(), pool(), 1);
    const auto b = compile(severed, small_dims(), pool(), 1);
    std::size_t featurizer_size = 0;
    for (const auto& e : b.parameters().entries())
      if (e.key.rfind("feat1.", 0) == 0) featurizer_size += e.tensor.size();
    CHECK(featurizer_size > 0);
    CHECK(b.parameters().scalar_count(excl) - a.parameters().scalar_count(excl) == featurizer_size);
  }
}

TEST_CASE("differential instance with identical branches outputs zero") {
  Rng rng(7);
  for (int cls = 10; cls <= 17; ++cls) {
    auto model = compile(single(cls), small_dims(), pool(), 5);
    auto& store = model.parameters();
    for (auto& e : store.entries()) {
      const auto pos = e.key.find(".b1.");
      if (pos == std::string::npos) continue;
      std::string twin = e.key;
      twin.replace(pos, 4, ".b0.");
      const auto src = store.get(twin).values();
      std::copy(src.begin(), src.end(), e.tensor.mutable_values().begin());
    }
    const auto x = random_input(9, 8, rng);
    const auto y = model.apply(0, x);
    for (double v : y.values()) CHECK(v == 0.0);
  }
}

TEST_CASE("relabeling sharing groups does not change the model") {
  const auto a = parse_genome("11212-91111-12121-92121-11212", 8);
  const auto b = parse_genome("13232-91111-12121-92121-13232", 8);
  REQUIRE(validate(a, pool()).empty());
  REQUIRE(validate(b, pool()).empty());
  const auto ma = compile(a, small_dims(), pool(), 9);
  const auto mb = compile(b, small_dims(), pool(), 9);
  CHECK(ma.parameters().scalar_count() == mb.parameters().scalar_count());
  std::vector<int> tokens{1, 4, 2, 8, 5, 7};
  const auto la = ma.forward(tokens), lb = mb.forward(tokens);
  for (std::size_t i = 0; i < la.size(); ++i) CHECK(la.values()[i] == lb.values()[i]);
}

TEST_CASE("zero-depth backbone is head(norm(embed))") {
  BackboneGenome g;
  g.width = 8;
  const auto model = compile(g, small_dims(), pool(), 2);
  std::vector<int> tokens{0, 3, 10};
  const auto& p = model.parameters();
  const auto ref = grad::matmul(grad::rms_norm(grad::embed_lookup(p.get("embed"), tokens), p.get("final_norm")),
                                p.get("head"));
  const auto out = model.forward(tokens);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.values()[i] == ref.values()[i]);
}

TEST_CASE("residual extension adds the earlier block output") {
  const auto g = parse_genome("1,1,1,1,1,1-9,1,1,1,1,2-5,1,1,1,1,1", 8);
  REQUIRE(validate(g, pool()).empty());
  const auto model = compile(g, small_dims(), pool(), 3);
  CHECK(model.instance(2).residual_source == 0);
  CHECK_FALSE(model.instance(1).residual_source.has_value());
  std::vector<int> tokens{1, 2, 3, 4, 5, 6};
  const auto& p = model.parameters();
  auto block = [&](std::size_t i, const Tensor& u) {
    return grad::add(u, model.apply(i, grad::rms_norm(u, p.get(model.instance(i).norm_key()))));
  };
  const auto h0 = grad::embed_lookup(p.get("embed"), tokens);
  const auto y0 = block(0, h0);
  const auto y1 = block(1, y0);
  const auto y2 = block(2, grad::add(y1, y0));
  const auto ref = grad::matmul(grad::rms_norm(y2, p.get("final_norm")), p.get("head"));
  const auto out = model.forward(tokens);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.values()[i] == doctest::Approx(ref.values()[i]));
}

TEST_CASE("compile and forward errors") {
  BackboneGenome bad;
  bad.width = 8;
  bad.genes = {LivGene{2, 1, 2, 1, 1}, LivGene{3, 1, 2, 1, 1}};
  CHECK_THROWS_AS(compile(bad, small_dims(), pool(), 1), CompileError);
  CHECK_THROWS_AS(compile(single(1, 16), small_dims(), pool(), 1), CompileError);
  auto dims = small_dims();
  dims.width = 6;
  dims.head_dim = 4;
  CHECK_THROWS_AS(compile(single(1, 6), dims, pool(), 1), CompileError);

  auto model = compile(single(classes::kRec1), small_dims(), pool(), 1);
  std::vector<int> oov{1, 11};
  CHECK_THROWS_AS(model.forward(oov), InputError);
  model.parameters().get("liv0.b0.out").mutable_values()[0] = std::nan("");
  std::vector<int> tokens{1, 2};
  try {
    model.forward(tokens);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(e.layer() == 0);
  }
}

TEST_CASE("initialization is deterministic and parameters round-trip") {
  const auto g = parse_genome("21211-31112-21221-32112", 8);
  auto a = compile(g, small_dims(), pool(), 42);
  const auto b = compile(g, small_dims(), pool(), 42);
  const auto c = compile(g, small_dims(), pool(), 43);
  CHECK(a.parameters().serialize() == b.parameters().serialize());
  CHECK(a.parameters().serialize() != c.parameters().serialize());
  a.parameters().deserialize(c.parameters().serialize());
  CHECK(a.parameters().serialize() == c.parameters().serialize());
}

TEST_CASE("parallel scan mode gives the same forward pass") {
  auto dims = small_dims();
  const auto g = striped_hybrid(4, 8, classes::kRec1);
  const auto a = compile(g, dims, pool(), 4);
  dims.scan = grad::ScanMode::Parallel;
  const auto b = compile(g, dims, pool(), 4);
  std::vector<int> tokens{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(rel_err(a.forward(tokens).values(), b.forward(tokens).values()) < 1e-9);
}
