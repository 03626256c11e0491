#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "livsynth/tensor.hpp"

namespace livsynth {

struct ParameterEntry {
  std::string key;
  grad::Tensor tensor;
  bool decay = true;  ///< receives decoupled weight decay
};

/// Keyed, insertion-ordered collection of trainable tensors.
class ParameterStore {
 public:
  grad::Tensor add(const std::string& key, std::size_t rows, std::size_t cols, std::vector<double> values,
                   bool decay = true);
  bool contains(const std::string& key) const { return index_.count(key) != 0; }
  const grad::Tensor& get(const std::string& key) const;
  grad::Tensor& get(const std::string& key);

  const std::vector<ParameterEntry>& entries() const { return entries_; }
  std::vector<ParameterEntry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Total scalar count over entries whose key does not start with any of `exclude_prefixes`.
  std::size_t scalar_count(const std::vector<std::string>& exclude_prefixes = {}) const;

  void zero_grad();

  /// Flat keyed binary blob: magic, entry count, then (key, rows, cols, doubles) per entry.
  std::string serialize() const;
  /// Overwrites values of matching keys; throws if a key is missing or shapes differ.
  void deserialize(const std::string& blob);
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  std::vector<ParameterEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace livsynth
