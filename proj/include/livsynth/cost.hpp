#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "livsynth/liv.hpp"

namespace livsynth {

struct InstanceCost {
  std::size_t index = 0;
  std::string name;
  std::uint64_t parameters = 0;
  std::uint64_t cache_bytes = 0;
};

/// Static size and inference-cache figures. Totals are the sums of `instances`.
struct CostReport {
  std::uint64_t parameter_count = 0;
  std::uint64_t cache_bytes = 0;
  std::size_t seq_len = 0;
  std::size_t bytes_per_element = 2;
  std::vector<InstanceCost> instances;
};

inline constexpr std::size_t kDefaultBytesPerElement = 2;

/// Counted parameters: featurizer and output projections. Embedding, head and norm scales are not counted.
bool counts_toward_size(const ParameterSpec& spec);

/// Cache of one instance at `seq_len` tokens.
std::uint64_t instance_cache_bytes(const LivInstance& inst, const CompileDims& dims, std::size_t seq_len,
                                   std::size_t bytes_per_element);

/// Full report without allocating any parameters; works at paper-scale widths.
CostReport analyze(const BackboneGenome& genome, const CompileDims& dims, const OptionPool& pool, std::size_t seq_len,
                   std::size_t bytes_per_element = kDefaultBytesPerElement);
CostReport analyze(const CompiledBackbone& model, std::size_t seq_len,
                   std::size_t bytes_per_element = kDefaultBytesPerElement);

std::uint64_t parameter_count(const CompiledBackbone& model);
std::uint64_t cache_bytes(const CompiledBackbone& model, std::size_t seq_len,
                          std::size_t bytes_per_element = kDefaultBytesPerElement);

}  // namespace livsynth
