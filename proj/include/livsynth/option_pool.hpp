#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

namespace livsynth {

enum class TokenMixing { Diagonal = 1, LowRank = 2, ScaledToeplitz = 3, SemiSeparable = 4 };
enum class Sparsity { None = 1, Banded = 2 };
enum class Nonlinearity { None = 1, Softmax = 2, Relu = 3, Swish = 4 };
enum class ChannelMixing { Diagonal = 1, Dense = 2, Grouped = 3 };
enum class Parametrization { InputProjection = 1, Explicit = 2, Implicit = 3 };

/// Five-integer description of one LIV: featurizer class plus the structure of T.
struct OperatorGenome {
  int featurizer_class = 1;
  TokenMixing token_mixing = TokenMixing::Diagonal;
  Sparsity sparsity = Sparsity::None;
  Nonlinearity nonlinearity = Nonlinearity::None;
  ChannelMixing channel_mixing = ChannelMixing::Diagonal;
  bool differential = false;

  std::array<int, 5> digits() const;
  friend bool operator==(const OperatorGenome&, const OperatorGenome&) = default;
};

/// One feature group of a featurizer (seven integers plus the group's role name).
struct FeatureGroupSpec {
  std::string role;
  TokenMixing token_mixing = TokenMixing::Diagonal;
  Sparsity sparsity = Sparsity::None;
  Nonlinearity nonlinearity = Nonlinearity::None;
  ChannelMixing channel_mixing = ChannelMixing::Dense;
  Parametrization parametrization = Parametrization::InputProjection;
  int expansion_factor = 1;
  int repeat_factor = 1;

  std::array<int, 7> digits() const;
};

inline constexpr std::size_t kMaxFeatureGroups = 5;

struct FeaturizerGenome {
  int id = 0;
  std::string description;
  std::vector<FeatureGroupSpec> groups;

  /// 35 integers; slots past the last group are zero.
  std::array<std::array<int, 7>, kMaxFeatureGroups> encode() const;
};

struct LivClass {
  int id = 0;
  std::string name;
  OperatorGenome op;
  /// Roles that may be routed between instances, in strategy-enumeration order.
  std::vector<std::string> shareable_roles;
  /// For differential classes, the class whose two copies are subtracted.
  int base_class = 0;
};

/// Registered LIV classes, featurizer classes and sharing strategies.
class OptionPool {
 public:
  /// The 17 LIV classes and 9 featurizer classes used throughout.
  static const OptionPool& standard();

  void add_featurizer(FeaturizerGenome f);
  void add_class(LivClass c);

  bool contains(int class_id) const { return classes_.count(class_id) != 0; }
  const LivClass& liv(int class_id) const;
  const FeaturizerGenome& featurizer(int featurizer_id) const;
  const FeaturizerGenome& featurizer_of(int class_id) const { return featurizer(liv(class_id).op.featurizer_class); }
  std::vector<int> class_ids() const;

  /// Ordered subsets of the class's shareable roles; index 0 (strategy 1) is empty.
  std::vector<std::vector<std::string>> group_share_strategies(int class_id) const;
  int group_strategy_count(int class_id) const;
  static constexpr int kFeaturizerStrategyCount = 2;

  /// Class id by display name, or 0.
  int find(const std::string& name) const;

 private:
  std::map<int, LivClass> classes_;
  std::map<int, FeaturizerGenome> featurizers_;
};

/// Expands a backbone class id into its operator genome.
OperatorGenome expand_liv_class(int class_id, const OptionPool& pool);

namespace classes {
inline constexpr int kSA1 = 1;
inline constexpr int kSA2 = 2;
inline constexpr int kSA3 = 3;
inline constexpr int kSA4 = 4;
inline constexpr int kRec1 = 5;
inline constexpr int kRec2 = 6;
inline constexpr int kGConv1 = 7;
inline constexpr int kGConv2 = 8;
inline constexpr int kGMemless = 9;
inline constexpr int kDifferentialOffset = 9;
}  // namespace classes

}  // namespace livsynth
