#include "livsynth/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "livsynth/errors.hpp"

namespace livsynth {

namespace {

// One JSON object of the config; every key read is recorded so leftovers can be rejected.
class Section {
 public:
  Section(const json* j, std::string path) : j_(j), path_(std::move(path)) {
    if (j_ && !j_->is_object()) fail(path_, "expected an object");
  }

  bool has(const char* key) const { return j_ && j_->contains(key); }

  template <class T>
  void read(const char* key, T& out) {
    if (!has(key)) return;
    seen_.insert(key);
    const json& v = (*j_)[key];
    const std::string where = field(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(where, "expected true or false");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(where, "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(where, "expected a number");
      out = v.get<T>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        fail(where, "expected a non-negative integer");
      out = v.get<T>();
    } else {
      if (!v.is_number_integer()) fail(where, "expected an integer");
      out = v.get<T>();
    }
  }

  void read_strings(const char* key, std::vector<std::string>& out) {
    if (!has(key)) return;
    seen_.insert(key);
    const json& v = (*j_)[key];
    if (!v.is_array()) fail(field(key), "expected a list of strings");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_string()) fail(field(key), "expected a list of strings");
      out.push_back(e.get<std::string>());
    }
  }

  const json* raw(const char* key) {
    if (!has(key)) return nullptr;
    seen_.insert(key);
    return &(*j_)[key];
  }

  Section child(const char* key) { return Section(raw(key), field(key)); }

  /// Rejects keys nobody asked for.
  void finish() const {
    if (!j_) return;
    for (const auto& [k, v] : j_->items())
      if (!seen_.count(k)) fail(field(k), "unknown key");
  }

  std::string field(const std::string& key) const { return path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& where, const std::string& msg) {
    throw ConfigError(where + ": " + msg);
  }

 private:
  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void guarded(const std::string& where, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    if (what.rfind("config.", 0) == 0) throw;
    throw ConfigError(where + ": " + what);
  }
}

int class_from_text(const std::string& s, const OptionPool& pool) {
  if (int id = pool.find(s)) return id;
  try {
    std::size_t used = 0;
    const int id = std::stoi(s, &used);
    if (used == s.size() && pool.contains(id)) return id;
  } catch (const std::exception&) {
  }
  throw ConfigError("unknown LIV class '" + s + "'");
}

}  // namespace

void RunConfig::check() const {
  guarded("config.evolution", [&] { evolution.check(); });
  guarded("config.fitness", [&] { objectives.check(); });
  const auto& p = resolve_pool(pool);
  if (seeding.depth < 1) throw ConfigError("config.model.depth: must be >= 1");
  if (!(seeding.hybrid_fraction >= 0.0 && seeding.hybrid_fraction <= 1.0))
    throw ConfigError("config.seeding.hybrid_fraction: must be in [0, 1]");
  if (seeding.genomes.size() > evolution.population)
    throw ConfigError("config.seeding.genomes: more genomes than the population size");
  for (int b : seeding.baselines)
    if (!p.contains(b)) throw ConfigError("config.seeding.baselines: unknown class " + std::to_string(b));
  if (objectives.dims.width < 1 || objectives.dims.vocab < 2 || objectives.dims.seq_len < 1 ||
      objectives.dims.head_dim < 1)
    throw ConfigError("config.model: width, vocab, seq_len and head_dim must be positive (vocab >= 2)");
  if (output_dir.empty()) throw ConfigError("config.output_dir: must not be empty");
  if (snapshot_every < 1) throw ConfigError("config.snapshot_every: must be >= 1");
}

const OptionPool& resolve_pool(const std::string& name) {
  if (name == "standard") return OptionPool::standard();
  throw ConfigError("config.pool: unknown option pool '" + name + "' (available: standard)");
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  Section top(&j, "config");
  top.read("pool", c.pool);
  top.read("output_dir", c.output_dir);
  top.read("snapshot_every", c.snapshot_every);

  {
    auto s = top.child("evolution");
    auto& e = c.evolution;
    std::string alg = algorithm_name(e.algorithm);
    s.read("algorithm", alg);
    guarded(s.field("algorithm"), [&] { e.algorithm = parse_algorithm(alg); });
    s.read("population", e.population);
    s.read("generations", e.generations);
    s.read("tournament", e.tournament);
    s.read("crossover_points", e.crossover_points);
    s.read("mutation_rate", e.mutation_rate);
    s.read("elites", e.elites);
    s.read("fa_beta0", e.fa_beta0);
    s.read("fa_gamma", e.fa_gamma);
    s.read("seed", e.seed);
    s.read("parallelism", e.parallelism);
    s.finish();
  }
  {
    auto s = top.child("fitness");
    std::vector<std::string> names;
    s.read_strings("objectives", names);
    if (!names.empty()) {
      c.objectives.objectives.clear();
      for (const auto& n : names)
        guarded(s.field("objectives"), [&] { c.objectives.objectives.push_back(parse_objective(n)); });
    } else if (s.has("objectives")) {
      Section::fail(s.field("objectives"), "at least one objective is required");
    }
    s.read("cache_seq_len", c.objectives.cache_seq_len);
    s.read("bytes_per_element", c.objectives.bytes_per_element);
    s.finish();
  }
  {
    auto s = top.child("model");
    auto& d = c.objectives.dims;
    s.read("depth", c.seeding.depth);
    s.read("width", d.width);
    s.read("vocab", d.vocab);
    s.read("seq_len", d.seq_len);
    s.read("head_dim", d.head_dim);
    s.read("short_kernel", d.short_kernel);
    s.read("mlp_hidden", d.mlp_hidden);
    s.read("implicit_features", d.implicit_features);
    s.read("band", d.band);
    s.read("init_std", d.init_std);
    std::string scan = d.scan == grad::ScanMode::Parallel ? "parallel" : "sequential";
    s.read("scan", scan);
    if (scan == "parallel") d.scan = grad::ScanMode::Parallel;
    else if (scan == "sequential") d.scan = grad::ScanMode::Sequential;
    else Section::fail(s.field("scan"), "expected sequential or parallel");
    s.finish();
  }
  {
    auto s = top.child("task");
    auto& t = c.objectives.task;
    t.vocab = c.objectives.dims.vocab;
    t.seq_len = c.objectives.dims.seq_len;
    std::string kind = task_name(t.kind);
    s.read("kind", kind);
    guarded(s.field("kind"), [&] { t.kind = parse_task_kind(kind); });
    s.read("vocab", t.vocab);
    s.read("seq_len", t.seq_len);
    s.read("train_size", t.train_size);
    s.read("eval_size", t.eval_size);
    s.read("seed", t.seed);
    s.read("eval_split", t.eval_split);
    s.read("pairs", t.pairs);
    s.read("corpus_path", t.corpus_path);
    s.finish();
  }
  {
    auto s = top.child("train");
    auto& t = c.objectives.train;
    s.read("peak_lr", t.peak_lr);
    s.read("warmup_steps", t.warmup_steps);
    s.read("total_steps", t.total_steps);
    s.read("beta1", t.beta1);
    s.read("beta2", t.beta2);
    s.read("weight_decay", t.weight_decay);
    s.read("grad_clip_norm", t.grad_clip_norm);
    s.read("eps", t.eps);
    s.read("batch", t.batch);
    s.read("seed", t.seed);
    s.finish();
  }
  {
    auto s = top.child("seeding");
    s.read("hybrid_fraction", c.seeding.hybrid_fraction);
    std::vector<std::string> baselines;
    if (s.has("baselines")) {
      const json* b = s.raw("baselines");
      if (!b->is_array()) Section::fail(s.field("baselines"), "expected a list of class names or ids");
      c.seeding.baselines.clear();
      for (const auto& e : *b) {
        const std::string text = e.is_string() ? e.get<std::string>() : e.is_number_integer() ? e.dump() : "";
        if (text.empty()) Section::fail(s.field("baselines"), "expected a list of class names or ids");
        guarded(s.field("baselines"), [&] { c.seeding.baselines.push_back(class_from_text(text, resolve_pool(c.pool))); });
      }
    }
    s.read_strings("genomes", c.seeding.genomes);
    s.finish();
  }
  top.finish();

  c.check();
  for (std::size_t i = 0; i < c.seeding.genomes.size(); ++i) {
    const std::string where = "config.seeding.genomes[" + std::to_string(i) + "]";
    guarded(where, [&] {
      BackboneGenome g;
      try {
        g = parse_genome(c.seeding.genomes[i], c.objectives.dims.width);
      } catch (const ParseError& e) {
        throw ConfigError(e.what());
      }
      const auto v = validate(g, resolve_pool(c.pool));
      if (!v.empty()) throw ConfigError("invalid genome: " + v.front().message);
    });
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  auto c = parse_run_config(j);
  // relative corpus paths are resolved against the config file's directory
  auto& corpus = c.objectives.task.corpus_path;
  if (!corpus.empty() && std::filesystem::path(corpus).is_relative())
    corpus = (std::filesystem::path(path).parent_path() / corpus).lexically_normal().string();
  return c;
}

json run_config_to_json(const RunConfig& c) {
  const auto& e = c.evolution;
  const auto& d = c.objectives.dims;
  const auto& t = c.objectives.task;
  const auto& tr = c.objectives.train;
  json objectives = json::array();
  for (auto o : c.objectives.objectives) objectives.push_back(objective_name(o));
  json baselines = json::array();
  for (int b : c.seeding.baselines) baselines.push_back(resolve_pool(c.pool).liv(b).name);
  return {
      {"pool", c.pool},
      {"output_dir", c.output_dir},
      {"snapshot_every", c.snapshot_every},
      {"evolution",
       {{"algorithm", algorithm_name(e.algorithm)},
        {"population", e.population},
        {"generations", e.generations},
        {"tournament", e.tournament},
        {"crossover_points", e.crossover_points},
        {"mutation_rate", e.mutation_rate},
        {"elites", e.elites},
        {"fa_beta0", e.fa_beta0},
        {"fa_gamma", e.fa_gamma},
        {"seed", e.seed},
        {"parallelism", e.parallelism}}},
      {"fitness",
       {{"objectives", objectives},
        {"cache_seq_len", c.objectives.cache_seq_len},
        {"bytes_per_element", c.objectives.bytes_per_element}}},
      {"model",
       {{"depth", c.seeding.depth},
        {"width", d.width},
        {"vocab", d.vocab},
        {"seq_len", d.seq_len},
        {"head_dim", d.head_dim},
        {"short_kernel", d.short_kernel},
        {"mlp_hidden", d.mlp_hidden},
        {"implicit_features", d.implicit_features},
        {"band", d.band},
        {"init_std", d.init_std},
        {"scan", d.scan == grad::ScanMode::Parallel ? "parallel" : "sequential"}}},
      {"task",
       {{"kind", task_name(t.kind)},
        {"vocab", t.vocab},
        {"seq_len", t.seq_len},
        {"train_size", t.train_size},
        {"eval_size", t.eval_size},
        {"seed", t.seed},
        {"eval_split", t.eval_split},
        {"pairs", t.pairs},
        {"corpus_path", t.corpus_path}}},
      {"train",
       {{"peak_lr", tr.peak_lr},
        {"warmup_steps", tr.warmup_steps},
        {"total_steps", tr.total_steps},
        {"beta1", tr.beta1},
        {"beta2", tr.beta2},
        {"weight_decay", tr.weight_decay},
        {"grad_clip_norm", tr.grad_clip_norm},
        {"eps", tr.eps},
        {"batch", tr.batch},
        {"seed", tr.seed}}},
      {"seeding", {{"hybrid_fraction", c.seeding.hybrid_fraction}, {"baselines", baselines}, {"genomes", c.seeding.genomes}}},
  };
}

std::vector<BackboneGenome> build_seed_population(const RunConfig& c, const OptionPool& pool) {
  std::vector<BackboneGenome> out;
  for (const auto& text : c.seeding.genomes) out.push_back(parse_genome(text, c.objectives.dims.width));
  Rng rng(c.evolution.seed, 0x7365656473);
  auto rest = seed_population(c.evolution.population - out.size(), c.seeding.depth, c.objectives.dims.width, pool, rng,
                              c.seeding.hybrid_fraction, c.seeding.baselines);
  for (auto& g : rest) out.push_back(std::move(g));
  return out;
}

}  // namespace livsynth
