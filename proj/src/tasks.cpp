#include "livsynth/tasks.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "livsynth/errors.hpp"
#include "livsynth/rng.hpp"

namespace livsynth {

namespace {

constexpr std::uint64_t kTrainStream = 0x7472616900000000ULL;
constexpr std::uint64_t kEvalStream = 0x6576616c00000000ULL;

std::uint64_t content_hash(const std::vector<int>& tokens) {
  std::uint64_t h = 1469598103934665603ULL;
  for (int t : tokens) {
    h ^= static_cast<std::uint64_t>(t) + 1;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string task_name(TaskKind k) {
  switch (k) {
    case TaskKind::Copy: return "copy";
    case TaskKind::AssociativeRecall: return "associative_recall";
    case TaskKind::TinyLm: return "tiny_lm";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "copy") return TaskKind::Copy;
  if (name == "associative_recall") return TaskKind::AssociativeRecall;
  if (name == "tiny_lm") return TaskKind::TinyLm;
  throw ConfigError("unknown task '" + name + "' (expected copy, associative_recall or tiny_lm)");
}

Task::Task(TaskSpec spec) : spec_(std::move(spec)) {
  if (spec_.vocab < 2) throw ConfigError("task vocab must be >= 2");
  if (spec_.seq_len < 4) throw ConfigError("task seq_len must be >= 4");
  if (spec_.train_size < 1 || spec_.eval_size < 1) throw ConfigError("task train/eval sizes must be >= 1");
  if (spec_.eval_split != 0 && spec_.eval_split != 1) throw ConfigError("eval_split must be 0 or 1");

  if (spec_.kind == TaskKind::AssociativeRecall) {
    if (spec_.vocab < 4 || spec_.vocab % 2 != 0) throw ConfigError("associative recall needs an even vocab >= 4");
    if (spec_.pairs < 1 || spec_.pairs > spec_.vocab / 2 || 2 * spec_.pairs + 2 > spec_.seq_len)
      throw ConfigError("associative recall pairs must fit the key range and the sequence");
  }

  if (spec_.kind == TaskKind::TinyLm) {
    std::ifstream in(spec_.corpus_path, std::ios::binary);
    if (!in) throw ConfigError("cannot read corpus file '" + spec_.corpus_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    // Most frequent characters get their own id; the rest share the last id.
    std::map<unsigned char, std::size_t> freq;
    for (unsigned char c : text) ++freq[c];
    std::vector<std::pair<std::size_t, unsigned char>> order;
    for (auto [c, n] : freq) order.push_back({n, c});
    std::sort(order.begin(), order.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    std::map<unsigned char, int> id;
    for (std::size_t i = 0; i < order.size(); ++i)
      id[order[i].second] = std::min(static_cast<int>(i), spec_.vocab - 1);
    for (unsigned char c : text) corpus_.push_back(id[c]);
    const auto window = static_cast<std::size_t>(spec_.seq_len) + 1;
    corpus_train_end_ = corpus_.size() * 9 / 10;
    if (corpus_train_end_ < window || corpus_.size() - corpus_train_end_ < 2 * window)
      throw ConfigError("corpus '" + spec_.corpus_path + "' is too short for seq_len " + std::to_string(spec_.seq_len));
    // Held-out tail split in two halves, one per evaluation split; windows never cross into training text.
    const std::size_t held = corpus_.size() - corpus_train_end_;
    const std::size_t lo = corpus_train_end_ + (spec_.eval_split == 0 ? 0 : held / 2);
    const std::size_t hi = spec_.eval_split == 0 ? corpus_train_end_ + held / 2 : corpus_.size();
    if (hi - lo < window) throw ConfigError("held-out corpus split is too short");
    const std::size_t span = hi - lo - window;
    for (std::size_t i = 0; i < spec_.eval_size; ++i)
      eval_.push_back(corpus_window(lo + (spec_.eval_size == 1 ? 0 : span * i / (spec_.eval_size - 1))));
    return;
  }

  std::unordered_set<std::uint64_t> train_hashes;
  for (std::size_t i = 0; i < spec_.train_size; ++i) train_hashes.insert(content_hash(train_example(i).tokens));
  const std::uint64_t base = kEvalStream + (static_cast<std::uint64_t>(spec_.eval_split) << 32);
  std::unordered_set<std::uint64_t> eval_hashes;
  for (std::uint64_t s = 0; eval_.size() < spec_.eval_size; ++s) {
    if (s > 1000 * spec_.eval_size + 1000) throw ConfigError("task space too small for a disjoint evaluation set");
    Example e = generate(base + s);
    const auto h = content_hash(e.tokens);
    if (train_hashes.count(h) || !eval_hashes.insert(h).second) continue;
    eval_.push_back(std::move(e));
  }
}

Example Task::corpus_window(std::size_t offset) const {
  Example e;
  const auto L = static_cast<std::size_t>(spec_.seq_len);
  e.tokens.assign(corpus_.begin() + offset, corpus_.begin() + offset + L);
  e.targets.assign(corpus_.begin() + offset + 1, corpus_.begin() + offset + L + 1);
  e.weights.assign(L, 1.0);
  return e;
}

Example Task::generate(std::uint64_t stream) const {
  Rng rng(spec_.seed, stream);
  const auto L = static_cast<std::size_t>(spec_.seq_len);
  Example e;
  e.tokens.assign(L, 0);
  e.targets.assign(L, 0);
  e.weights.assign(L, 0.0);
  switch (spec_.kind) {
    case TaskKind::Copy: {
      // First half random, second half repeats it; loss on predicting the repeat.
      const std::size_t h = L / 2;
      for (std::size_t i = 0; i < h; ++i) e.tokens[i] = static_cast<int>(rng.index(spec_.vocab));
      for (std::size_t i = h; i < L; ++i) e.tokens[i] = e.tokens[i - h];
      for (std::size_t i = 0; i + 1 < L; ++i) {
        e.targets[i] = e.tokens[i + 1];
        if (i + 1 >= h) e.weights[i] = 1.0;
      }
      break;
    }
    case TaskKind::AssociativeRecall: {
      // Keys in the lower half of the vocabulary, values in the upper half.
      const int half = spec_.vocab / 2;
      std::vector<int> keys(half);
      for (int k = 0; k < half; ++k) keys[k] = k;
      for (int k = 0; k < spec_.pairs; ++k) std::swap(keys[k], keys[k + rng.index(half - k)]);
      std::vector<int> values(spec_.pairs);
      for (auto& v : values) v = half + static_cast<int>(rng.index(half));
      std::size_t p = 0;
      for (int k = 0; k < spec_.pairs; ++k) {
        e.tokens[p++] = keys[k];
        e.tokens[p++] = values[k];
      }
      while (p + 1 < L) {
        const auto q = rng.index(spec_.pairs);
        e.tokens[p] = keys[q];
        e.tokens[p + 1] = values[q];
        e.targets[p] = values[q];
        e.weights[p] = 1.0;
        p += 2;
      }
      for (std::size_t i = 0; i + 1 < L; ++i)
        if (e.weights[i] == 0.0) e.targets[i] = e.tokens[i + 1];
      break;
    }
    case TaskKind::TinyLm:
      break;
  }
  return e;
}

Example Task::train_example(std::size_t index) const {
  index %= spec_.train_size;
  if (spec_.kind == TaskKind::TinyLm) {
    Rng rng(spec_.seed, kTrainStream + index);
    const std::size_t window = static_cast<std::size_t>(spec_.seq_len) + 1;
    return corpus_window(rng.index(corpus_train_end_ - window + 1));
  }
  return generate(kTrainStream + index);
}

std::vector<Example> Task::train_batch(std::size_t step, std::size_t batch, std::uint64_t seed) const {
  Rng rng(seed, 0x6261746368ULL + step);
  std::vector<Example> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) out.push_back(train_example(rng.index(spec_.train_size)));
  return out;
}

}  // namespace livsynth
