#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "livsynth/genome.hpp"
#include "livsynth/option_pool.hpp"
#include "livsynth/params.hpp"
#include "livsynth/tensor.hpp"

namespace livsynth {

/// Model-wide sizes and hyperparameters used when compiling a genome.
struct CompileDims {
  int width = 32;
  int vocab = 32;
  int seq_len = 64;  ///< also the implicit long-kernel length
  int head_dim = 8;
  int short_kernel = 3;
  int mlp_hidden = 0;  ///< 0 selects 8*width/3 rounded up to a multiple of 8
  int implicit_features = 8;
  int band = 0;  ///< window of the banded sparsity mask
  double init_std = 0.02;
  grad::ScanMode scan = grad::ScanMode::Sequential;

  int hidden() const;
};

/// Which algorithm applies the operator; decided by the operator genome's token mixing.
enum class StructureKind { Memoryless, Attention, Recurrence, Convolution };

StructureKind structure_of(const OperatorGenome& op);

struct FeatureGroupValue {
  std::string role;
  int branch = 0;
  grad::Tensor values;  ///< [sequence x group channels]; the kernel role is [taps x width]
};

using FeatureGroups = std::vector<FeatureGroupValue>;

const grad::Tensor& find_group(const FeatureGroups& groups, const std::string& role, int branch = 0);

struct LivInstance {
  std::size_t index = 0;
  int class_id = 0;
  std::string name;
  OperatorGenome op;
  FeaturizerGenome featurizer;
  StructureKind kind = StructureKind::Memoryless;
  bool differential = false;
  int branches = 1;

  /// Parameter-key prefix of the featurizer; equal across a featurizer-sharing group.
  std::string featurizer_binding;
  /// role -> index of the earlier instance whose groups are reused.
  std::map<std::string, std::size_t> routed;
  /// Index of the earlier instance whose output joins this instance's residual input.
  std::optional<std::size_t> residual_source;

  int head_dim = 1;
  int kv_repeat = 1;
  int state_size = 1;
  int kernel_len = 1;
  int inner_width = 0;  ///< channels entering the output projection

  std::string featurizer_key(const std::string& role, int branch, const std::string& part) const;
  std::string output_key(int branch) const;
  std::string norm_key() const;
  bool is_routed(const std::string& role) const { return routed.count(role) != 0; }
};

/// Explicit operator T with y_i = sum_j T_ij x_j, entries T[i][j][out][in].
struct DenseOperator {
  std::size_t seq_len = 0;
  std::size_t width = 0;
  std::vector<double> entries;

  double& at(std::size_t i, std::size_t j, std::size_t out, std::size_t in) {
    return entries[((i * seq_len + j) * width + out) * width + in];
  }
  double at(std::size_t i, std::size_t j, std::size_t out, std::size_t in) const {
    return entries[((i * seq_len + j) * width + out) * width + in];
  }
  /// Row-major [seq x width] product with x.
  std::vector<double> apply(std::span<const double> x) const;
};

inline constexpr std::size_t kDenseOracleCap = 32;

/// An executable backbone: instances, parameter bindings, sharing routes, embedding and head.
class CompiledBackbone {
 public:
  CompiledBackbone() = default;

  const CompileDims& dims() const { return dims_; }
  const std::vector<LivInstance>& instances() const { return instances_; }
  const LivInstance& instance(std::size_t i) const { return instances_.at(i); }
  const ParameterStore& parameters() const { return params_; }
  ParameterStore& parameters() { return params_; }
  const BackboneGenome& genome() const { return genome_; }

  /// Distinct featurizer binding prefixes in use.
  std::vector<std::string> featurizer_bindings() const;

  /// Feature groups of instance `i` computed from its (normalized) input x. Routed roles are omitted.
  FeatureGroups featurize(std::size_t i, const grad::Tensor& x) const;
  /// Structure-specific application; `groups` must hold every role of the instance.
  grad::Tensor apply_structured(std::size_t i, const FeatureGroups& groups, const grad::Tensor& x) const;
  /// featurize + apply_structured for an instance without routed roles.
  grad::Tensor apply(std::size_t i, const grad::Tensor& x) const;
  /// Explicit T for instance `i` given its groups. Refuses seq_len above kDenseOracleCap.
  DenseOperator materialize_dense(std::size_t i, const FeatureGroups& groups, std::size_t seq_len) const;

  /// Logits [seq x vocab].
  grad::Tensor forward(std::span<const int> tokens) const;

  friend CompiledBackbone compile(const BackboneGenome&, const CompileDims&, const OptionPool&, std::uint64_t);

 private:
  CompileDims dims_;
  BackboneGenome genome_;
  std::vector<LivInstance> instances_;
  ParameterStore params_;
};

enum class ParameterInit { Normal, OnePlusNormal, PassThroughTaps, DecayBias, Ones };

/// Shape and initialization rule of one parameter tensor, without its values.
struct ParameterSpec {
  std::string key;
  std::size_t rows = 0;
  std::size_t cols = 0;
  ParameterInit init = ParameterInit::Normal;
  bool decay = true;
  std::optional<std::size_t> owner;  ///< first instance using the tensor; none for embed/head/final norm
  std::size_t size() const { return rows * cols; }
};

/// Validates the genome and resolves instances, bindings and routes without allocating parameters.
std::vector<LivInstance> plan_instances(const BackboneGenome& genome, const CompileDims& dims, const OptionPool& pool);
/// Every parameter tensor the planned instances need, each shared tensor listed once.
std::vector<ParameterSpec> parameter_layout(const std::vector<LivInstance>& instances, const CompileDims& dims);

/// Builds instances, sharing routes and deterministically initialized parameters.
CompiledBackbone compile(const BackboneGenome& genome, const CompileDims& dims, const OptionPool& pool,
                         std::uint64_t seed);

}  // namespace livsynth
