#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "livsynth/errors.hpp"
#include "livsynth/rng.hpp"
#include "livsynth/tensor.hpp"

using namespace livsynth;
using namespace livsynth::grad;

namespace {

std::vector<double> randn(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Central finite differences (h = 1e-4) against backward for a scalar built from `f`.
// The output is contracted with fixed random weights so every output entry matters.
void check_gradients(const std::vector<std::pair<std::size_t, std::size_t>>& shapes,
                     const std::function<Tensor(const std::vector<Tensor>&)>& f, std::uint64_t seed = 1,
                     double tol = 1e-4, std::function<double(Rng&)> draw = nullptr) {
  Rng rng(seed);
  std::vector<std::vector<double>> init;
  for (auto [r, c] : shapes) {
    std::vector<double> v(r * c);
    for (auto& x : v) x = draw ? draw(rng) : rng.normal();
    init.push_back(v);
  }
  auto build = [&](const std::vector<std::vector<double>>& vals) {
    std::vector<Tensor> ins;
    for (std::size_t i = 0; i < shapes.size(); ++i)
      ins.push_back(Tensor::parameter(shapes[i].first, shapes[i].second, vals[i]));
    return ins;
  };
  auto ins = build(init);
  Tensor out = f(ins);
  Rng wr(seed + 100);
  const Tensor w = Tensor::constant(out.rows(), out.cols(), randn(out.size(), wr));
  auto loss_of = [&](const Tensor& o) { return sum(multiply(o, w)); };
  loss_of(out).backward();

  const double h = 1e-4;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto g = ins[i].grad();
    for (std::size_t k = 0; k < init[i].size(); ++k) {
      auto plus = init, minus = init;
      plus[i][k] += h;
      minus[i][k] -= h;
      const double fp = loss_of(f(build(plus))).item();
      const double fm = loss_of(f(build(minus))).item();
      const double fd = (fp - fm) / (2 * h);
      const double err = std::abs(fd - g[k]) / std::max(1.0, std::abs(fd));
      CHECK_MESSAGE(err < tol, "input " << i << " entry " << k << " analytic " << g[k] << " numeric " << fd);
    }
  }
}

Tensor rand_tensor(std::size_t r, std::size_t c, Rng& rng) { return Tensor::constant(r, c, randn(r * c, rng)); }

}  // namespace

TEST_CASE("finite-difference gradients of every primitive") {
  using S = std::vector<std::pair<std::size_t, std::size_t>>;
  check_gradients(S{{4, 4}, {4, 4}}, [](auto& t) { return matmul(t[0], t[1]); });
  check_gradients(S{{4, 3}}, [](auto& t) { return transpose(t[0]); });
  check_gradients(S{{4, 4}, {4, 4}}, [](auto& t) { return add(t[0], t[1]); });
  check_gradients(S{{4, 4}, {4, 4}}, [](auto& t) { return sub(t[0], t[1]); });
  check_gradients(S{{4, 4}, {4, 4}}, [](auto& t) { return multiply(t[0], t[1]); });
  check_gradients(S{{4, 4}}, [](auto& t) { return scale(t[0], -1.7); });
  check_gradients(S{{4, 4}, {1, 4}}, [](auto& t) { return add_row(t[0], t[1]); });
  check_gradients(S{{4, 4}, {1, 4}}, [](auto& t) { return mul_row(t[0], t[1]); });
  check_gradients(S{{4, 4}}, [](auto& t) { return sigmoid(t[0]); });
  check_gradients(S{{4, 4}}, [](auto& t) { return swish(t[0]); });
  // Keep relu inputs away from the kink.
  check_gradients(S{{4, 4}}, [](auto& t) { return relu(t[0]); }, 3, 1e-4,
                  [](Rng& r) { double v = r.normal(); return v + (v >= 0 ? 0.1 : -0.1); });
  check_gradients(S{{4, 4}}, [](auto& t) { return causal_softmax(t[0]); });
  check_gradients(S{{4, 4}}, [](auto& t) { return causal_softmax(t[0], 2); });
  check_gradients(S{{4, 4}}, [](auto& t) { return causal_mask(t[0], 3); });
  check_gradients(S{{4, 4}, {1, 4}}, [](auto& t) { return rms_norm(t[0], t[1]); });
  check_gradients(S{{4, 4}, {3, 4}}, [](auto& t) { return causal_conv1d(t[0], t[1], ConvMethod::Direct); });
  check_gradients(S{{4, 4}, {4, 4}}, [](auto& t) { return causal_conv1d(t[0], t[1], ConvMethod::Fft); });
  check_gradients(S{{4, 4}, {4, 4}}, [](auto& t) { return gated_scan(sigmoid(t[0]), t[1]); });
  check_gradients(S{{4, 4}, {4, 4}},
                  [](auto& t) { return gated_scan(sigmoid(t[0]), t[1], ScanMode::Parallel); });
  const std::vector<int> ids{3, 0, 2, 3};
  check_gradients(S{{4, 4}}, [&](auto& t) { return embed_lookup(t[0], ids); });
  const std::vector<int> targets{1, 0, 3, 2};
  const std::vector<double> weights{0.0, 1.0, 1.0, 0.5};
  check_gradients(S{{4, 4}}, [&](auto& t) { return cross_entropy(t[0], targets); });
  check_gradients(S{{4, 4}}, [&](auto& t) { return cross_entropy(t[0], targets, weights); });
  check_gradients(S{{4, 4}}, [](auto& t) { return slice_cols(t[0], 1, 2); });
  check_gradients(S{{4, 2}, {4, 3}}, [](auto& t) { return concat_cols({t[0], t[1]}); });
  check_gradients(S{{4, 2}}, [](auto& t) { return tile_cols(t[0], 3); });
  check_gradients(S{{4, 2}}, [](auto& t) { return repeat_cols(t[0], 3); });
  check_gradients(S{{4, 4}}, [](auto& t) { return group_sum_cols(t[0], 2); });
  check_gradients(S{{4, 4}}, [](auto& t) { return sum(t[0]); });
}

TEST_CASE("gated scan with unit gates is a cumulative sum; its input gradient is a reversed cumulative sum") {
  Rng rng(2);
  const auto xv = randn(6, rng);
  Tensor x = Tensor::parameter(6, 1, xv);
  Tensor y = gated_scan(Tensor::filled(6, 1, 1.0), x);
  double acc = 0;
  for (std::size_t t = 0; t < 6; ++t) {
    acc += xv[t];
    CHECK(y.at(t, 0) == doctest::Approx(acc));
  }
  const auto gy = randn(6, rng);
  sum(multiply(y, Tensor::constant(6, 1, gy))).backward();
  double rev = 0;
  for (int t = 5; t >= 0; --t) {
    rev += gy[t];
    CHECK(x.grad()[t] == doctest::Approx(rev));
  }
}

TEST_CASE("sequential and parallel scans agree") {
  Rng rng(3);
  for (std::size_t len : {1u, 5u, 16u, 63u, 200u}) {
    const auto g = sigmoid(rand_tensor(len, 3, rng));
    const auto u = rand_tensor(len, 3, rng);
    const auto a = gated_scan(g, u, ScanMode::Sequential);
    const auto b = gated_scan(g, u, ScanMode::Parallel);
    for (std::size_t i = 0; i < a.size(); ++i)
      CHECK(std::abs(a.values()[i] - b.values()[i]) <= 1e-6 * std::max(1.0, std::abs(a.values()[i])));
  }
}

TEST_CASE("FFT and direct convolutions agree") {
  Rng rng(4);
  for (auto [len, taps] : std::vector<std::pair<std::size_t, std::size_t>>{{8, 3}, {64, 64}, {300, 200}, {5, 9}}) {
    const auto x = randn(len * 4, rng);
    const auto k = randn(taps * 4, rng);
    const auto a = conv_direct(x, k, len, taps, 4);
    const auto b = conv_fft(x, k, len, taps, 4);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      num += (a[i] - b[i]) * (a[i] - b[i]);
      den += a[i] * a[i];
    }
    CHECK(std::sqrt(num / den) < 1e-6);
  }
}

TEST_CASE("causal softmax rows sum to one over the window") {
  Rng rng(5);
  const auto p = causal_softmax(rand_tensor(6, 6, rng));
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 6; ++j) {
      if (j > i) CHECK(p.at(i, j) == 0.0);
      s += p.at(i, j);
    }
    CHECK(s == doctest::Approx(1.0));
  }
  const auto banded = causal_softmax(rand_tensor(6, 6, rng), 2);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j + 2 <= i; ++j) CHECK(banded.at(i, j) == 0.0);
}

TEST_CASE("shape and input errors") {
  Rng rng(6);
  CHECK_THROWS_AS(matmul(rand_tensor(2, 3, rng), rand_tensor(2, 3, rng)), ShapeError);
  CHECK_THROWS_AS(add(rand_tensor(2, 3, rng), rand_tensor(3, 2, rng)), ShapeError);
  const std::vector<int> bad{0, 7};
  CHECK_THROWS_AS(embed_lookup(rand_tensor(4, 2, rng), bad), InputError);
  CHECK_THROWS_AS(rand_tensor(2, 2, rng).backward(), ShapeError);
}

TEST_CASE("cross entropy of uniform logits is log of the vocabulary") {
  const std::vector<int> t{0, 5, 31};
  CHECK(cross_entropy(Tensor::zeros(3, 32), t).item() == doctest::Approx(std::log(32.0)));
}

TEST_CASE("gradients accumulate through shared subexpressions") {
  Tensor x = Tensor::parameter(1, 1, {3.0});
  Tensor y = multiply(x, x);
  sum(add(y, x)).backward();
  CHECK(x.grad()[0] == doctest::Approx(7.0));
}
