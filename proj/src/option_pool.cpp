#include "livsynth/option_pool.hpp"

#include "livsynth/errors.hpp"

namespace livsynth {

std::array<int, 5> OperatorGenome::digits() const {
  return {featurizer_class, static_cast<int>(token_mixing), static_cast<int>(sparsity),
          static_cast<int>(nonlinearity), static_cast<int>(channel_mixing)};
}

std::array<int, 7> FeatureGroupSpec::digits() const {
  return {static_cast<int>(token_mixing), static_cast<int>(sparsity),    static_cast<int>(nonlinearity),
          static_cast<int>(channel_mixing), static_cast<int>(parametrization), expansion_factor,
          repeat_factor};
}

std::array<std::array<int, 7>, kMaxFeatureGroups> FeaturizerGenome::encode() const {
  std::array<std::array<int, 7>, kMaxFeatureGroups> out{};
  for (std::size_t g = 0; g < groups.size() && g < kMaxFeatureGroups; ++g) out[g] = groups[g].digits();
  return out;
}

void OptionPool::add_featurizer(FeaturizerGenome f) {
  if (f.groups.empty() || f.groups.size() > kMaxFeatureGroups)
    throw PoolError("featurizer " + std::to_string(f.id) + " must have 1..5 feature groups");
  featurizers_[f.id] = std::move(f);
}

void OptionPool::add_class(LivClass c) {
  if (featurizers_.count(c.op.featurizer_class) == 0)
    throw PoolError("class " + std::to_string(c.id) + " references unknown featurizer " +
                    std::to_string(c.op.featurizer_class));
  classes_[c.id] = std::move(c);
}

const LivClass& OptionPool::liv(int class_id) const {
  auto it = classes_.find(class_id);
  if (it == classes_.end()) throw PoolError("LIV class " + std::to_string(class_id) + " is not in the option pool");
  return it->second;
}

const FeaturizerGenome& OptionPool::featurizer(int featurizer_id) const {
  auto it = featurizers_.find(featurizer_id);
  if (it == featurizers_.end())
    throw PoolError("featurizer class " + std::to_string(featurizer_id) + " is not in the option pool");
  return it->second;
}

std::vector<int> OptionPool::class_ids() const {
  std::vector<int> ids;
  ids.reserve(classes_.size());
  for (const auto& [id, _] : classes_) ids.push_back(id);
  return ids;
}

std::vector<std::vector<std::string>> OptionPool::group_share_strategies(int class_id) const {
  const auto& roles = liv(class_id).shareable_roles;
  std::vector<std::vector<std::string>> out;
  const std::size_t count = std::size_t{1} << roles.size();
  out.reserve(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    std::vector<std::string> subset;
    for (std::size_t r = 0; r < roles.size(); ++r)
      if (mask & (std::size_t{1} << r)) subset.push_back(roles[r]);
    out.push_back(std::move(subset));
  }
  return out;
}

int OptionPool::group_strategy_count(int class_id) const {
  return 1 << static_cast<int>(liv(class_id).shareable_roles.size());
}

int OptionPool::find(const std::string& name) const {
  for (const auto& [id, c] : classes_)
    if (c.name == name) return id;
  return 0;
}

OperatorGenome expand_liv_class(int class_id, const OptionPool& pool) { return pool.liv(class_id).op; }

namespace {

FeatureGroupSpec group(std::string role, TokenMixing tm, Sparsity sp, Nonlinearity nl, ChannelMixing cm,
                       Parametrization pm = Parametrization::InputProjection, int expansion = 1, int repeat = 1) {
  return FeatureGroupSpec{std::move(role), tm, sp, nl, cm, pm, expansion, repeat};
}

OptionPool build_standard() {
  using TM = TokenMixing;
  using SP = Sparsity;
  using NL = Nonlinearity;
  using CM = ChannelMixing;
  using PM = Parametrization;
  OptionPool pool;

  // Projection feature groups with and without a short causal convolution.
  auto proj = [](std::string role, int expansion = 1, int repeat = 1, NL nl = NL::None) {
    return group(std::move(role), TM::Diagonal, SP::None, nl, CM::Dense, PM::InputProjection, expansion, repeat);
  };
  auto conv_proj = [](std::string role, int expansion = 1, NL nl = NL::None) {
    return group(std::move(role), TM::ScaledToeplitz, SP::Banded, nl, CM::Dense, PM::InputProjection, expansion, 1);
  };
  auto conv_diag = [](std::string role) {
    return group(std::move(role), TM::ScaledToeplitz, SP::Banded, NL::None, CM::Diagonal);
  };

  pool.add_featurizer({1, "dense projections, 3 groups", {proj("Q"), proj("K"), proj("V")}});
  pool.add_featurizer({2, "dense projections + short convolutions, 3 groups",
                       {conv_proj("Q"), conv_proj("K"), conv_proj("V")}});
  pool.add_featurizer({3, "dense projections, K/V repeated 4x", {proj("Q"), proj("K", 1, 4), proj("V", 1, 4)}});
  pool.add_featurizer({4, "dense projections, K/V repeated 2x", {proj("Q"), proj("K", 1, 2), proj("V", 1, 2)}});
  pool.add_featurizer({5, "dense projections + short convolutions, B/C expanded 16x",
                       {conv_proj("V"), conv_proj("G", 1, NL::Swish), conv_proj("A"), conv_proj("B", 16),
                        conv_proj("C", 16)}});
  pool.add_featurizer({6, "dense projections + short convolutions, B/C expanded 2x",
                       {conv_proj("V"), conv_proj("G", 1, NL::Swish), conv_proj("A"), conv_proj("B", 2),
                        conv_proj("C", 2)}});
  pool.add_featurizer({7, "diagonal gates + short convolutions, explicit short kernel",
                       {conv_diag("B"), conv_diag("C"),
                        group("kernel", TM::ScaledToeplitz, SP::Banded, NL::None, CM::Diagonal, PM::Explicit)}});
  pool.add_featurizer({8, "diagonal gates + short convolutions, implicit long kernel",
                       {conv_diag("B"), conv_diag("C"),
                        group("kernel", TM::ScaledToeplitz, SP::None, NL::None, CM::Diagonal, PM::Implicit)}});
  // Hidden width of the memoryless unit comes from CompileDims::mlp_hidden; 3 is the nominal ratio.
  pool.add_featurizer({9, "dense projections, 2 groups", {proj("gate", 3), proj("up", 3)}});

  auto op = [](int f, TM tm, SP sp, NL nl, CM cm) { return OperatorGenome{f, tm, sp, nl, cm, false}; };
  const std::vector<std::string> attention_shared{"K", "V"};
  const std::vector<std::string> recurrence_shared{"B", "C"};
  const std::vector<std::string> convolution_shared{"kernel", "C"};

  pool.add_class({1, "SA-1", op(1, TM::LowRank, SP::None, NL::Softmax, CM::Grouped), attention_shared, 0});
  pool.add_class({2, "SA-2", op(2, TM::LowRank, SP::None, NL::Softmax, CM::Grouped), attention_shared, 0});
  pool.add_class({3, "SA-3", op(3, TM::LowRank, SP::None, NL::Softmax, CM::Grouped), attention_shared, 0});
  pool.add_class({4, "SA-4", op(4, TM::LowRank, SP::None, NL::Softmax, CM::Grouped), attention_shared, 0});
  pool.add_class({5, "Rec-1", op(5, TM::SemiSeparable, SP::None, NL::None, CM::Diagonal), recurrence_shared, 0});
  pool.add_class({6, "Rec-2", op(6, TM::SemiSeparable, SP::None, NL::None, CM::Diagonal), recurrence_shared, 0});
  pool.add_class({7, "GConv-1", op(7, TM::ScaledToeplitz, SP::None, NL::None, CM::Diagonal), convolution_shared, 0});
  pool.add_class({8, "GConv-2", op(8, TM::ScaledToeplitz, SP::None, NL::None, CM::Diagonal), convolution_shared, 0});
  pool.add_class({9, "GMemless", op(9, TM::Diagonal, SP::None, NL::Swish, CM::Dense), {"gate"}, 0});

  for (int base = 1; base <= 8; ++base) {
    LivClass d = pool.liv(base);
    d.id = base + classes::kDifferentialOffset;
    d.name = d.name + "-Diff";
    d.op.differential = true;
    d.base_class = base;
    pool.add_class(std::move(d));
  }
  return pool;
}

}  // namespace

const OptionPool& OptionPool::standard() {
  static const OptionPool pool = build_standard();
  return pool;
}

}  // namespace livsynth
