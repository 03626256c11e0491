#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace livsynth {

enum class TaskKind { Copy, AssociativeRecall, TinyLm };

std::string task_name(TaskKind k);
TaskKind parse_task_kind(const std::string& name);

struct TaskSpec {
  TaskKind kind = TaskKind::AssociativeRecall;
  int vocab = 32;
  int seq_len = 64;
  std::size_t train_size = 4096;  ///< distinct training sequences
  std::size_t eval_size = 64;
  std::uint64_t seed = 0;
  int eval_split = 0;  ///< 0 or 1: two disjoint evaluation sets
  int pairs = 4;       ///< key-value pairs per associative-recall sequence
  std::string corpus_path;  ///< tiny_lm text file
};

/// One sequence with next-token targets; the loss is averaged over positions with nonzero weight.
struct Example {
  std::vector<int> tokens;
  std::vector<int> targets;
  std::vector<double> weights;
};

/// Deterministic example source. Training and evaluation examples never coincide.
class Task {
 public:
  explicit Task(TaskSpec spec);

  const TaskSpec& spec() const { return spec_; }
  /// Training example `index` modulo train_size.
  Example train_example(std::size_t index) const;
  /// Batch for optimizer step `step`, drawn from the training pool with the given seed.
  std::vector<Example> train_batch(std::size_t step, std::size_t batch, std::uint64_t seed) const;
  const std::vector<Example>& eval_set() const { return eval_; }

 private:
  Example generate(std::uint64_t stream) const;
  Example corpus_window(std::size_t offset) const;

  TaskSpec spec_;
  std::vector<int> corpus_;      // encoded text
  std::size_t corpus_train_end_ = 0;
  std::vector<Example> eval_;
};

}  // namespace livsynth
