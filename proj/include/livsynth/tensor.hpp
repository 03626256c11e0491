#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace livsynth::grad {

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same size as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

/// Row-major 2-D tensor handle on a reverse-mode tape.
///
/// Copies share the underlying node. Parameters are leaves created with
/// `parameter()`; every primitive below records a backward closure when any
/// input requires a gradient.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor filled(std::size_t rows, std::size_t cols, double v);
  static Tensor parameter(std::size_t rows, std::size_t cols, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * node_->cols + c]; }
  double item() const;

  /// Gradient buffer; zeros if backward has not reached this tensor.
  std::span<const double> grad() const;
  void zero_grad();

  /// Seeds d(this)/d(this) = 1 (must be 1x1) and propagates to all ancestors.
  void backward() const;

  /// Same values, cut from the tape.
  Tensor detach() const;

  bool all_finite() const;

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise (same shape).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// Row broadcasts: `row` is 1 x cols.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor mul_row(const Tensor& a, const Tensor& row);

// Activations.
Tensor sigmoid(const Tensor& a);
Tensor swish(const Tensor& a);
Tensor relu(const Tensor& a);

/// Row-wise softmax over the causal window j <= i (and j > i - band when band > 0).
/// Requires a square score matrix; masked entries are exactly zero.
Tensor causal_softmax(const Tensor& scores, std::size_t band = 0);
/// Zeroes entries outside the causal window.
Tensor causal_mask(const Tensor& a, std::size_t band = 0);

/// Root-mean-square normalization of each row, times a learned 1 x cols scale.
Tensor rms_norm(const Tensor& x, const Tensor& scale, double eps = 1e-6);

enum class ConvMethod { Auto, Direct, Fft };
/// Depthwise causal convolution: y[t][c] = sum_s kernel[s][c] * x[t-s][c].
Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, ConvMethod method = ConvMethod::Auto);

enum class ScanMode { Sequential, Parallel };
/// h[t] = gate[t] * h[t-1] + input[t], h[-1] = 0, elementwise per column.
Tensor gated_scan(const Tensor& gate, const Tensor& input, ScanMode mode = ScanMode::Sequential);

/// Rows of `table` selected by `ids`.
Tensor embed_lookup(const Tensor& table, std::span<const int> ids);

/// Mean token cross-entropy over rows with nonzero weight. Targets index columns of `logits`.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, std::span<const double> weights = {});

// Column plumbing.
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);
/// [a b] -> [a b a b ...] (`reps` copies).
Tensor tile_cols(const Tensor& a, std::size_t reps);
/// [a b] -> [a a b b] (`reps` copies of each column).
Tensor repeat_cols(const Tensor& a, std::size_t reps);
/// Sums consecutive blocks of `group` columns: cols -> cols / group.
Tensor group_sum_cols(const Tensor& a, std::size_t group);

/// Sum of all entries as a 1x1 tensor.
Tensor sum(const Tensor& a);

/// Direct and FFT-based depthwise causal convolution on raw buffers (exposed for tests).
std::vector<double> conv_direct(std::span<const double> x, std::span<const double> kernel, std::size_t len,
                                std::size_t taps, std::size_t channels);
std::vector<double> conv_fft(std::span<const double> x, std::span<const double> kernel, std::size_t len,
                             std::size_t taps, std::size_t channels);

}  // namespace livsynth::grad
