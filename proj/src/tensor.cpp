#include "livsynth/tensor.hpp"

#include <Eigen/Core>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <unordered_set>

#include "livsynth/errors.hpp"

namespace livsynth::grad {

namespace {

using NodePtr = std::shared_ptr<Node>;

std::string shape_str(const Tensor& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

Tensor make(std::size_t rows, std::size_t cols, std::vector<double> value, std::vector<NodePtr> parents,
            std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(value);
  n->requires_grad = std::any_of(parents.begin(), parents.end(), [](const NodePtr& p) { return p->requires_grad; });
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool in_window(std::size_t i, std::size_t j, std::size_t band) { return j <= i && (band == 0 || i - j < band); }

}  // namespace

Tensor Tensor::constant(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols) throw ShapeError("constant: value count does not match shape");
  auto n = std::make_shared<Node>();
  n->rows = rows;
  n->cols = cols;
  n->value = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) { return filled(rows, cols, 0.0); }

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double v) {
  return constant(rows, cols, std::vector<double>(rows * cols, v));
}

Tensor Tensor::parameter(std::size_t rows, std::size_t cols, std::vector<double> values) {
  Tensor t = constant(rows, cols, std::move(values));
  t.node_->requires_grad = true;
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() needs a 1x1 tensor, got " + shape_str(*this));
  return node_->value[0];
}

std::span<const double> Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  if (size() != 1) throw ShapeError("backward() needs a scalar, got " + shape_str(*this));
  if (!node_->requires_grad) return;
  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backward) continue;
    n->ensure_grad();
    for (auto& p : n->parents)
      if (p->requires_grad) p->ensure_grad();
    n->backward(*n);
  }
}

Tensor Tensor::detach() const { return constant(rows(), cols(), node_->value); }

bool Tensor::all_finite() const {
  return std::all_of(node_->value.begin(), node_->value.end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape_str(a) + " @ " + shape_str(b));
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  using MMap = Eigen::Map<Mat>;
  const auto m = static_cast<Eigen::Index>(a.rows()), k = static_cast<Eigen::Index>(a.cols()),
             n = static_cast<Eigen::Index>(b.cols());
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  MMap(out.data(), m, n).noalias() = CMap(a.values().data(), m, k) * CMap(b.values().data(), k, n);
  auto an = a.node_ptr(), bn = b.node_ptr();
  return make(a.rows(), b.cols(), std::move(out), {an, bn}, [an, bn, m, k, n](Node& self) {
    const CMap g(self.grad.data(), m, n);
    if (an->requires_grad) MMap(an->grad.data(), m, k).noalias() += g * CMap(bn->value.data(), k, n).transpose();
    if (bn->requires_grad) MMap(bn->grad.data(), k, n).noalias() += CMap(an->value.data(), m, k).transpose() * g;
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto v = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  auto an = a.node_ptr();
  return make(c, r, std::move(out), {an}, [an, r, c](Node& self) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) an->grad[i * c + j] += self.grad[j * r + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  auto an = a.node_ptr(), bn = b.node_ptr();
  return make(a.rows(), a.cols(), std::move(out), {an, bn}, [an, bn](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += self.grad[i];
      if (bn->requires_grad) bn->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
  auto an = a.node_ptr(), bn = b.node_ptr();
  return make(a.rows(), a.cols(), std::move(out), {an, bn}, [an, bn](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += self.grad[i];
      if (bn->requires_grad) bn->grad[i] -= self.grad[i];
    }
  });
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "multiply");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  auto an = a.node_ptr(), bn = b.node_ptr();
  return make(a.rows(), a.cols(), std::move(out), {an, bn}, [an, bn](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (an->requires_grad) an->grad[i] += self.grad[i] * bn->value[i];
      if (bn->requires_grad) bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * s;
  auto an = a.node_ptr();
  return make(a.rows(), a.cols(), std::move(out), {an}, [an, s](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * s;
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("add_row: " + shape_str(a) + " + " + shape_str(row));
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = a.values()[i * c + j] + row.values()[j];
  auto an = a.node_ptr(), rn = row.node_ptr();
  return make(r, c, std::move(out), {an, rn}, [an, rn, r, c](Node& self) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double g = self.grad[i * c + j];
        if (an->requires_grad) an->grad[i * c + j] += g;
        if (rn->requires_grad) rn->grad[j] += g;
      }
  });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("mul_row: " + shape_str(a) + " * " + shape_str(row));
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = a.values()[i * c + j] * row.values()[j];
  auto an = a.node_ptr(), rn = row.node_ptr();
  return make(r, c, std::move(out), {an, rn}, [an, rn, r, c](Node& self) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        const double g = self.grad[i * c + j];
        if (an->requires_grad) an->grad[i * c + j] += g * rn->value[j];
        if (rn->requires_grad) rn->grad[j] += g * an->value[i * c + j];
      }
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(a.values()[i]);
  auto an = a.node_ptr();
  return make(a.rows(), a.cols(), std::move(out), {an}, [an](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double s = self.value[i];
      an->grad[i] += self.grad[i] * s * (1.0 - s);
    }
  });
}

Tensor swish(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * sigmoid_scalar(a.values()[i]);
  auto an = a.node_ptr();
  return make(a.rows(), a.cols(), std::move(out), {an}, [an](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double x = an->value[i];
      const double s = sigmoid_scalar(x);
      an->grad[i] += self.grad[i] * (s + x * s * (1.0 - s));
    }
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, a.values()[i]);
  auto an = a.node_ptr();
  return make(a.rows(), a.cols(), std::move(out), {an}, [an](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (an->value[i] > 0.0) an->grad[i] += self.grad[i];
  });
}

Tensor causal_softmax(const Tensor& scores, std::size_t band) {
  if (scores.rows() != scores.cols()) throw ShapeError("causal_softmax needs square scores, got " + shape_str(scores));
  const std::size_t n = scores.rows();
  std::vector<double> out(n * n, 0.0);
  const auto v = scores.values();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j <= i; ++j)
      if (in_window(i, j, band)) mx = std::max(mx, v[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j <= i; ++j)
      if (in_window(i, j, band)) z += (out[i * n + j] = std::exp(v[i * n + j] - mx));
    for (std::size_t j = 0; j <= i; ++j) out[i * n + j] /= z;
  }
  auto sn = scores.node_ptr();
  return make(n, n, std::move(out), {sn}, [sn, n](Node& self) {
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j <= i; ++j) dot += self.grad[i * n + j] * self.value[i * n + j];
      for (std::size_t j = 0; j <= i; ++j)
        sn->grad[i * n + j] += self.value[i * n + j] * (self.grad[i * n + j] - dot);
    }
  });
}

Tensor causal_mask(const Tensor& a, std::size_t band) {
  if (a.rows() != a.cols()) throw ShapeError("causal_mask needs a square matrix, got " + shape_str(a));
  const std::size_t n = a.rows();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      if (in_window(i, j, band)) out[i * n + j] = a.values()[i * n + j];
  auto an = a.node_ptr();
  return make(n, n, std::move(out), {an}, [an, n, band](Node& self) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        if (in_window(i, j, band)) an->grad[i * n + j] += self.grad[i * n + j];
  });
}

Tensor rms_norm(const Tensor& x, const Tensor& scale_row, double eps) {
  if (scale_row.rows() != 1 || scale_row.cols() != x.cols())
    throw ShapeError("rms_norm: scale " + shape_str(scale_row) + " for input " + shape_str(x));
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  std::vector<double> inv(r);
  for (std::size_t i = 0; i < r; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < c; ++j) ss += x.values()[i * c + j] * x.values()[i * c + j];
    inv[i] = 1.0 / std::sqrt(ss / static_cast<double>(c) + eps);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.values()[i * c + j] * inv[i] * scale_row.values()[j];
  }
  auto xn = x.node_ptr(), sn = scale_row.node_ptr();
  return make(r, c, std::move(out), {xn, sn}, [xn, sn, r, c, inv = std::move(inv)](Node& self) {
    for (std::size_t i = 0; i < r; ++i) {
      // y_j = x_j * inv * s_j ; d inv / d x_k = -inv^3 x_k / c
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * sn->value[j] * xn->value[i * c + j];
      for (std::size_t j = 0; j < c; ++j) {
        const double g = self.grad[i * c + j];
        if (sn->requires_grad) sn->grad[j] += g * xn->value[i * c + j] * inv[i];
        if (xn->requires_grad)
          xn->grad[i * c + j] += g * sn->value[j] * inv[i] -
                                 xn->value[i * c + j] * inv[i] * inv[i] * inv[i] * dot / static_cast<double>(c);
      }
    }
  });
}

std::vector<double> conv_direct(std::span<const double> x, std::span<const double> kernel, std::size_t len,
                                std::size_t taps, std::size_t channels) {
  std::vector<double> out(len * channels, 0.0);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t s = 0; s < taps && s <= t; ++s)
      for (std::size_t c = 0; c < channels; ++c) out[t * channels + c] += kernel[s * channels + c] * x[(t - s) * channels + c];
  return out;
}

namespace {
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

std::vector<double> conv_fft(std::span<const double> x, std::span<const double> kernel, std::size_t len,
                             std::size_t taps, std::size_t channels) {
  std::size_t n = 1;
  while (n < len + taps) n <<= 1;
  const std::size_t nc = n / 2 + 1;
  double* buf = fftw_alloc_real(n);
  fftw_complex* fx = fftw_alloc_complex(nc);
  fftw_complex* fk = fftw_alloc_complex(nc);
  fftw_plan fwd, inv;
  {
    // The FFTW planner is not thread-safe; execution is.
    std::lock_guard lock(fftw_planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf, fx, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), fx, buf, FFTW_ESTIMATE);
  }
  std::vector<double> out(len * channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    std::fill(buf, buf + n, 0.0);
    for (std::size_t s = 0; s < taps; ++s) buf[s] = kernel[s * channels + c];
    fftw_execute_dft_r2c(fwd, buf, fk);
    std::fill(buf, buf + n, 0.0);
    for (std::size_t t = 0; t < len; ++t) buf[t] = x[t * channels + c];
    fftw_execute_dft_r2c(fwd, buf, fx);
    for (std::size_t f = 0; f < nc; ++f) {
      const double re = fx[f][0] * fk[f][0] - fx[f][1] * fk[f][1];
      const double im = fx[f][0] * fk[f][1] + fx[f][1] * fk[f][0];
      fx[f][0] = re;
      fx[f][1] = im;
    }
    fftw_execute_dft_c2r(inv, fx, buf);
    for (std::size_t t = 0; t < len; ++t) out[t * channels + c] = buf[t] / static_cast<double>(n);
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }
  fftw_free(buf);
  fftw_free(fx);
  fftw_free(fk);
  return out;
}

Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, ConvMethod method) {
  if (kernel.cols() != x.cols())
    throw ShapeError("causal_conv1d: kernel " + shape_str(kernel) + " for input " + shape_str(x));
  const std::size_t len = x.rows(), taps = kernel.rows(), ch = x.cols();
  const std::size_t used = std::min(taps, len);
  if (method == ConvMethod::Auto) method = used >= 128 ? ConvMethod::Fft : ConvMethod::Direct;
  const auto kv = kernel.values().subspan(0, used * ch);
  auto out = method == ConvMethod::Fft ? conv_fft(x.values(), kv, len, used, ch)
                                       : conv_direct(x.values(), kv, len, used, ch);
  auto xn = x.node_ptr(), kn = kernel.node_ptr();
  return make(len, ch, std::move(out), {xn, kn}, [xn, kn, len, used, ch](Node& self) {
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t s = 0; s < used && s <= t; ++s)
        for (std::size_t c = 0; c < ch; ++c) {
          const double g = self.grad[t * ch + c];
          if (xn->requires_grad) xn->grad[(t - s) * ch + c] += g * kn->value[s * ch + c];
          if (kn->requires_grad) kn->grad[s * ch + c] += g * xn->value[(t - s) * ch + c];
        }
  });
}

Tensor gated_scan(const Tensor& gate, const Tensor& input, ScanMode mode) {
  require_same_shape(gate, input, "gated_scan");
  const std::size_t len = gate.rows(), ch = gate.cols();
  const auto a = gate.values();
  const auto u = input.values();
  std::vector<double> h(len * ch, 0.0);
  if (mode == ScanMode::Sequential) {
    for (std::size_t c = 0; c < ch; ++c) {
      double state = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        state = a[t * ch + c] * state + u[t * ch + c];
        h[t * ch + c] = state;
      }
    }
  } else {
    // Hillis-Steele inclusive scan of affine maps (a, u): applying (a1,u1) then (a2,u2) is (a1 a2, a2 u1 + u2).
    std::vector<double> ca(a.begin(), a.end()), cu(u.begin(), u.end());
    std::vector<double> na(len * ch), nu(len * ch);
    for (std::size_t offset = 1; offset < len; offset <<= 1) {
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t c = 0; c < ch; ++c) {
          const std::size_t i = t * ch + c;
          if (t >= offset) {
            const std::size_t p = (t - offset) * ch + c;
            na[i] = ca[p] * ca[i];
            nu[i] = ca[i] * cu[p] + cu[i];
          } else {
            na[i] = ca[i];
            nu[i] = cu[i];
          }
        }
      std::swap(ca, na);
      std::swap(cu, nu);
    }
    h = std::move(cu);
  }
  auto gn = gate.node_ptr(), in = input.node_ptr();
  return make(len, ch, std::move(h), {gn, in}, [gn, in, len, ch](Node& self) {
    for (std::size_t c = 0; c < ch; ++c) {
      double carry = 0.0;  // dL/dh_t including contributions from later steps
      for (std::size_t t = len; t-- > 0;) {
        const std::size_t i = t * ch + c;
        carry += self.grad[i];
        if (in->requires_grad) in->grad[i] += carry;
        if (gn->requires_grad && t > 0) gn->grad[i] += carry * self.value[(t - 1) * ch + c];
        carry *= gn->value[i];
      }
    }
  });
}

Tensor embed_lookup(const Tensor& table, std::span<const int> ids) {
  const std::size_t d = table.cols(), vocab = table.rows();
  std::vector<double> out(ids.size() * d);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= vocab)
      throw InputError("token " + std::to_string(ids[t]) + " outside vocabulary of " + std::to_string(vocab));
    std::copy_n(&table.values()[ids[t] * d], d, &out[t * d]);
  }
  auto tn = table.node_ptr();
  std::vector<int> idv(ids.begin(), ids.end());
  return make(ids.size(), d, std::move(out), {tn}, [tn, d, idv = std::move(idv)](Node& self) {
    for (std::size_t t = 0; t < idv.size(); ++t)
      for (std::size_t j = 0; j < d; ++j) tn->grad[idv[t] * d + j] += self.grad[t * d + j];
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, std::span<const double> weights) {
  const std::size_t n = logits.rows(), v = logits.cols();
  if (targets.size() != n) throw ShapeError("cross_entropy: target count does not match logits rows");
  if (!weights.empty() && weights.size() != n) throw ShapeError("cross_entropy: weight count does not match rows");
  std::vector<double> probs(n * v);
  std::vector<double> w(n, 1.0);
  if (!weights.empty()) std::copy(weights.begin(), weights.end(), w.begin());
  double total_w = 0.0, loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v)
      throw InputError("target " + std::to_string(targets[i]) + " outside vocabulary");
    const double* row = &logits.values()[i * v];
    const double mx = *std::max_element(row, row + v);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += (probs[i * v + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < v; ++j) probs[i * v + j] /= z;
    if (w[i] != 0.0) {
      loss += w[i] * (mx + std::log(z) - row[targets[i]]);
      total_w += w[i];
    }
  }
  if (total_w <= 0.0) throw InputError("cross_entropy: no positions carry weight");
  std::vector<int> tv(targets.begin(), targets.end());
  auto ln = logits.node_ptr();
  return make(1, 1, {loss / total_w}, {ln},
              [ln, n, v, total_w, tv = std::move(tv), w = std::move(w), probs = std::move(probs)](Node& self) {
                const double g = self.grad[0] / total_w;
                for (std::size_t i = 0; i < n; ++i) {
                  if (w[i] == 0.0) continue;
                  for (std::size_t j = 0; j < v; ++j) {
                    const double onehot = static_cast<int>(j) == tv[i] ? 1.0 : 0.0;
                    ln->grad[i * v + j] += g * w[i] * (probs[i * v + j] - onehot);
                  }
                }
              });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  if (start + count > a.cols()) throw ShapeError("slice_cols out of range for " + shape_str(a));
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i) std::copy_n(&a.values()[i * c + start], count, &out[i * count]);
  auto an = a.node_ptr();
  return make(r, count, std::move(out), {an}, [an, r, c, start, count](Node& self) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) an->grad[i * c + start + j] += self.grad[i * count + j];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  std::vector<NodePtr> nodes;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.rows() != r) throw ShapeError("concat_cols: row mismatch");
    total += p.cols();
    nodes.push_back(p.node_ptr());
    widths.push_back(p.cols());
  }
  std::vector<double> out(r * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i) std::copy_n(&p.values()[i * p.cols()], p.cols(), &out[i * total + off]);
    off += p.cols();
  }
  return make(r, total, std::move(out), nodes, [nodes, widths, r, total](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k]->requires_grad)
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) nodes[k]->grad[i * widths[k] + j] += self.grad[i * total + off + j];
      off += widths[k];
    }
  });
}

Tensor tile_cols(const Tensor& a, std::size_t reps) {
  const std::size_t r = a.rows(), c = a.cols(), oc = c * reps;
  std::vector<double> out(r * oc);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t k = 0; k < reps; ++k) std::copy_n(&a.values()[i * c], c, &out[i * oc + k * c]);
  auto an = a.node_ptr();
  return make(r, oc, std::move(out), {an}, [an, r, c, reps, oc](Node& self) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t k = 0; k < reps; ++k)
        for (std::size_t j = 0; j < c; ++j) an->grad[i * c + j] += self.grad[i * oc + k * c + j];
  });
}

Tensor repeat_cols(const Tensor& a, std::size_t reps) {
  const std::size_t r = a.rows(), c = a.cols(), oc = c * reps;
  std::vector<double> out(r * oc);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      for (std::size_t k = 0; k < reps; ++k) out[i * oc + j * reps + k] = a.values()[i * c + j];
  auto an = a.node_ptr();
  return make(r, oc, std::move(out), {an}, [an, r, c, reps, oc](Node& self) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        for (std::size_t k = 0; k < reps; ++k) an->grad[i * c + j] += self.grad[i * oc + j * reps + k];
  });
}

Tensor group_sum_cols(const Tensor& a, std::size_t group) {
  if (group == 0 || a.cols() % group != 0) throw ShapeError("group_sum_cols: group does not divide columns");
  const std::size_t r = a.rows(), c = a.cols(), oc = c / group;
  std::vector<double> out(r * oc, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * oc + j / group] += a.values()[i * c + j];
  auto an = a.node_ptr();
  return make(r, oc, std::move(out), {an}, [an, r, c, group, oc](Node& self) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) an->grad[i * c + j] += self.grad[i * oc + j / group];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  auto an = a.node_ptr();
  return make(1, 1, {s}, {an}, [an](Node& self) {
    for (auto& g : an->grad) g += self.grad[0];
  });
}

}  // namespace livsynth::grad
