#include "livsynth/cost.hpp"

#include "livsynth/errors.hpp"

namespace livsynth {

namespace {

std::uint64_t routed_or(const LivInstance& inst, const std::string& role, std::uint64_t channels) {
  return inst.is_routed(role) ? 0 : channels;
}

CostReport build_report(const std::vector<LivInstance>& instances, const CompileDims& dims, std::size_t seq_len,
                        std::size_t bytes) {
  if (seq_len < 1) throw InputError("cache sequence length must be >= 1");
  CostReport r;
  r.seq_len = seq_len;
  r.bytes_per_element = bytes;
  for (const auto& inst : instances)
    r.instances.push_back({inst.index, inst.name, 0, instance_cache_bytes(inst, dims, seq_len, bytes)});
  for (const auto& spec : parameter_layout(instances, dims))
    if (counts_toward_size(spec)) r.instances[*spec.owner].parameters += spec.size();
  for (const auto& c : r.instances) {
    r.parameter_count += c.parameters;
    r.cache_bytes += c.cache_bytes;
  }
  return r;
}

}  // namespace

bool counts_toward_size(const ParameterSpec& spec) {
  if (!spec.owner) return false;
  return !(spec.key.size() >= 5 && spec.key.compare(spec.key.size() - 5, 5, ".norm") == 0);
}

std::uint64_t instance_cache_bytes(const LivInstance& inst, const CompileDims& dims, std::size_t seq_len,
                                   std::size_t bytes) {
  const std::uint64_t d = static_cast<std::uint64_t>(dims.width);
  std::uint64_t per_branch = 0;
  switch (inst.kind) {
    case StructureKind::Attention: {
      // Keys and values for every past token; routed roles live in the producer's cache.
      const std::uint64_t kv = d / static_cast<std::uint64_t>(inst.kv_repeat);
      per_branch = seq_len * (routed_or(inst, "K", kv) + routed_or(inst, "V", kv)) * bytes;
      break;
    }
    case StructureKind::Recurrence:
      per_branch = (d * static_cast<std::uint64_t>(inst.state_size) +
                    static_cast<std::uint64_t>(dims.short_kernel - 1) * d) *
                   bytes;
      break;
    case StructureKind::Convolution:
      per_branch = static_cast<std::uint64_t>(inst.kernel_len - 1) * d * bytes;
      break;
    case StructureKind::Memoryless:
      break;
  }
  return per_branch * static_cast<std::uint64_t>(inst.branches);
}

CostReport analyze(const BackboneGenome& genome, const CompileDims& dims, const OptionPool& pool, std::size_t seq_len,
                   std::size_t bytes_per_element) {
  return build_report(plan_instances(genome, dims, pool), dims, seq_len, bytes_per_element);
}

CostReport analyze(const CompiledBackbone& model, std::size_t seq_len, std::size_t bytes_per_element) {
  return build_report(model.instances(), model.dims(), seq_len, bytes_per_element);
}

std::uint64_t parameter_count(const CompiledBackbone& model) {
  std::uint64_t n = 0;
  for (const auto& spec : parameter_layout(model.instances(), model.dims()))
    if (counts_toward_size(spec)) n += spec.size();
  return n;
}

std::uint64_t cache_bytes(const CompiledBackbone& model, std::size_t seq_len, std::size_t bytes_per_element) {
  return analyze(model, seq_len, bytes_per_element).cache_bytes;
}

}  // namespace livsynth
