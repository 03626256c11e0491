#include "livsynth/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "livsynth/analysis.hpp"
#include "livsynth/config.hpp"
#include "livsynth/errors.hpp"
#include "livsynth/records.hpp"

namespace livsynth {

namespace fs = std::filesystem;

namespace {

std::string thousands(std::uint64_t v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

// Genome argument: compact/canonical text, or a path to a structured genome file.
BackboneGenome load_genome(const std::string& arg, int width) {
  if (arg.size() > 5 && arg.ends_with(".json")) {
    std::ifstream in(arg);
    if (!in) throw ConfigError("cannot read genome file '" + arg + "'");
    try {
      return genome_from_json(json::parse(in));
    } catch (const json::parse_error& e) {
      throw ConfigError("genome file '" + arg + "' is not valid JSON: " + e.what());
    }
  }
  return parse_genome(arg, width);
}

struct GenomeSource {
  std::string text;
  std::string hybrid;
  std::size_t depth = 24;
  int width = 0;

  void attach(CLI::App& cmd, int default_width) {
    width = default_width;
    cmd.add_option("genome", text, "Genome text (compact or canonical) or a .json genome file");
    cmd.add_option("--hybrid", hybrid, "Striped hybrid of this class with GMemless instead of a genome");
    cmd.add_option("--depth", depth, "Depth of --hybrid")->capture_default_str();
    cmd.add_option("--width", width, "Model width")->capture_default_str();
  }

  BackboneGenome resolve(const OptionPool& pool) const {
    if (!text.empty() && !hybrid.empty()) throw ConfigError("give either a genome or --hybrid, not both");
    if (!hybrid.empty()) {
      int id = pool.find(hybrid);
      if (!id) {
        try {
          id = std::stoi(hybrid);
        } catch (const std::exception&) {
        }
      }
      if (!pool.contains(id)) throw ConfigError("unknown LIV class '" + hybrid + "'");
      return striped_hybrid(depth, width, id);
    }
    if (text.empty()) throw ConfigError("a genome (or --hybrid CLASS) is required");
    return load_genome(text, width);
  }
};

void require_valid(const BackboneGenome& g, const OptionPool& pool) {
  const auto v = validate(g, pool);
  if (v.empty()) return;
  std::string msg = "invalid genome:";
  for (const auto& x : v) msg += "\n  gene " + std::to_string(x.gene + 1) + ": " + x.message;
  throw ConfigError(msg);
}

// ---------------------------------------------------------------- score

int cmd_score(const GenomeSource& src, std::size_t seq_len, std::size_t bytes, int head_dim, bool as_json,
              bool per_instance, std::ostream& out) {
  const auto& pool = OptionPool::standard();
  const auto g = src.resolve(pool);
  require_valid(g, pool);
  CompileDims dims;
  dims.width = g.width;
  dims.head_dim = head_dim;
  dims.seq_len = static_cast<int>(seq_len);
  const auto r = analyze(g, dims, pool, seq_len, bytes);
  if (as_json) {
    json j = cost_to_json(r);
    j["genome"] = format_genome(g);
    j["width"] = g.width;
    out << j.dump() << '\n';
    return kExitOk;
  }
  out << "genome:      " << format_genome(g) << '\n';
  out << "width:       " << g.width << " (head dim " << head_dim << ")\n";
  out << "parameters:  " << thousands(r.parameter_count) << '\n';
  out << "cache bytes: " << thousands(r.cache_bytes) << " (seq_len " << seq_len << ", " << bytes
      << " bytes/element)\n";
  if (per_instance) {
    out << "\n  pos  LIV            parameters       cache bytes\n";
    for (const auto& i : r.instances)
      out << std::setw(5) << i.index + 1 << "  " << std::left << std::setw(12) << i.name << std::right << std::setw(13)
          << thousands(i.parameters) << std::setw(18) << thousands(i.cache_bytes) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- render

int cmd_render(const GenomeSource& src, const std::string& format, std::ostream& out) {
  const auto& pool = OptionPool::standard();
  const auto g = src.resolve(pool);
  require_valid(g, pool);
  if (format == "dot") out << render_dot(g, pool);
  else if (format == "json") out << genome_to_json(g).dump(2) << '\n';
  else out << render_text(g, pool);
  return kExitOk;
}

// ---------------------------------------------------------------- motifs

int cmd_motifs(const std::string& path, const std::string& format, std::ostream& out, std::ostream& err) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read results log '" + path + "'");
  const auto& pool = OptionPool::standard();
  const auto report = motifs_from_log(in, pool);
  for (const auto& w : report.warnings) err << "warning: skipped " << w << '\n';

  if (format == "jsonl") {
    for (const auto& r : report.rows) {
      json counts = json::object();
      for (const auto& [id, n] : r.class_counts) counts[pool.liv(id).name] = n;
      out << json{{"generation", r.generation},
                  {"genomes", r.genomes},
                  {"class_counts", counts},
                  {"featurizer_shared", r.featurizer_shared},
                  {"group_shared", r.group_shared},
                  {"pairs", r.pairs},
                  {"mean_distance", r.mean_distance}}
                 .dump()
          << '\n';
    }
  } else {
    // only classes that occur anywhere get a column
    std::vector<int> used;
    for (int id : pool.class_ids())
      for (const auto& r : report.rows)
        if (r.class_counts.at(id)) {
          used.push_back(id);
          break;
        }
    std::size_t col = 8;
    for (int id : used) col = std::max(col, pool.liv(id).name.size() + 2);
    const int w = static_cast<int>(col);
    out << std::setw(4) << "gen" << std::setw(6) << "n";
    for (int id : used) out << std::setw(w) << pool.liv(id).name;
    out << std::setw(10) << "feat" << std::setw(10) << "group" << std::setw(8) << "pairs" << std::setw(10) << "dist"
        << '\n';
    for (const auto& r : report.rows) {
      out << std::setw(4) << r.generation << std::setw(6) << r.genomes;
      for (int id : used) out << std::setw(w) << r.class_counts.at(id);
      std::ostringstream d;
      d << std::fixed << std::setprecision(3) << r.mean_distance;
      out << std::setw(10) << r.featurizer_shared << std::setw(10) << r.group_shared << std::setw(8) << r.pairs
          << std::setw(10) << d.str() << '\n';
    }
  }
  err << report.rows.size() << " generations, " << report.skipped << " corrupt lines skipped\n";
  return kExitOk;
}

// ---------------------------------------------------------------- evolve

json generation_summary(const EvolutionState& s, const std::vector<HistoryRecord>& records,
                        const std::vector<Objective>& objectives) {
  json mean = json::object(), best = json::object();
  std::size_t fresh = 0, diverged = 0, front = 0;
  for (const auto& r : records) fresh += !r.candidate.cached;
  for (const auto& c : s.population) {
    diverged += c.score.diverged;
    front += c.rank == 1;
  }
  for (std::size_t k = 0; k < objectives.size(); ++k) {
    double sum = 0.0, lo = INFINITY;
    std::size_t n = 0;
    for (const auto& c : s.population) {
      if (c.score.diverged || k >= c.score.values.size()) continue;
      sum += c.score.values[k];
      lo = std::min(lo, c.score.values[k]);
      ++n;
    }
    const auto name = objective_name(objectives[k]);
    mean[name] = n ? json(sum / static_cast<double>(n)) : json(nullptr);
    best[name] = n ? json(lo) : json(nullptr);
  }
  return {{"generation", s.generation}, {"evaluations", fresh}, {"diverged", diverged},
          {"front_size", front},        {"mean", mean},          {"best", best}};
}

void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream o(tmp, std::ios::trunc);
    if (!o) throw Error("cannot write '" + tmp.string() + "'");
    o << text;
  }
  fs::rename(tmp, path);
}

std::size_t env_parallelism(std::size_t fallback) {
  const char* v = std::getenv("LIVSYNTH_PARALLELISM");
  if (!v || !*v) return fallback;
  try {
    std::size_t used = 0;
    const long n = std::stol(v, &used);
    if (used == std::strlen(v) && n >= 1) return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string("LIVSYNTH_PARALLELISM: expected a positive integer, got '") + v + "'");
}

int cmd_evolve(const std::string& config_path, bool resume, bool quiet, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_run_config(config_path);
  if (const char* dir = std::getenv("LIVSYNTH_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
  cfg.evolution.parallelism = env_parallelism(cfg.evolution.parallelism);
  const auto& pool = resolve_pool(cfg.pool);
  const auto& objectives = cfg.objectives.objectives;

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const fs::path log_path = dir / "results.jsonl";
  const fs::path summary_path = dir / "generations.jsonl";
  const fs::path snapshot_path = dir / "snapshot.json";
  const fs::path config_out = dir / "config.json";

  // settings that change results; output location and thread count do not
  json identity = run_config_to_json(cfg);
  identity.erase("output_dir");
  identity["evolution"].erase("parallelism");
  identity.erase("snapshot_every");

  FitnessEvaluator fitness(cfg.objectives, pool);
  Evaluator evaluate = [&](const BackboneGenome& g, std::uint64_t seed) { return fitness.evaluate(g, seed); };

  std::ofstream log, summary;
  const auto t0 = std::chrono::steady_clock::now();
  auto hook = [&](const EvolutionState& s, const std::vector<HistoryRecord>& records) {
    for (const auto& r : records) log << record_to_json(r, objectives).dump() << '\n';
    log.flush();
    const auto sum = generation_summary(s, records, objectives);
    summary << sum.dump() << '\n';
    summary.flush();
    if (s.generation % cfg.snapshot_every == 0 || s.generation == cfg.evolution.generations)
      write_atomically(snapshot_path, state_to_json(s, objectives).dump() + '\n');
    if (!quiet) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      err << "generation " << s.generation << ": " << sum["evaluations"] << " evaluations, best "
          << sum["best"].dump() << ", mean " << sum["mean"].dump() << " (" << std::fixed << std::setprecision(1)
          << secs << " s)\n";
      err.unsetf(std::ios::fixed);
    }
  };

  EvolutionState state;
  bool resumed = false;
  if (resume && fs::exists(snapshot_path)) {
    std::ifstream in(config_out);
    json saved;
    try {
      saved = json::parse(in);
    } catch (const json::exception&) {
      throw ConfigError("cannot resume: '" + config_out.string() + "' is missing or unreadable");
    }
    saved.erase("output_dir");
    saved.erase("snapshot_every");
    if (saved.contains("evolution")) saved["evolution"].erase("parallelism");
    // the generation count may grow on resume
    json a = saved, b = identity;
    if (a.contains("evolution")) a["evolution"].erase("generations");
    b["evolution"].erase("generations");
    if (a != b) throw ConfigError("cannot resume: the config differs from the one used for '" + dir.string() + "'");
    std::ifstream snap(snapshot_path);
    state = state_from_json(json::parse(snap), objectives);
    // drop log lines written after the snapshot
    log.open(log_path, std::ios::trunc);
    for (const auto& r : state.history) log << record_to_json(r, objectives).dump() << '\n';
    summary.open(summary_path, std::ios::trunc);
    {
      EvolutionState view;
      std::map<std::size_t, std::vector<HistoryRecord>> by_gen;
      for (const auto& r : state.history) by_gen[r.generation].push_back(r);
      for (const auto& [g, recs] : by_gen) {
        view.generation = g;
        view.population.clear();
        for (const auto& r : recs)
          if (r.selected) view.population.push_back(r.candidate);
        summary << generation_summary(view, recs, objectives).dump() << '\n';
      }
    }
    resumed = true;
    if (!quiet) err << "resuming " << dir.string() << " after generation " << state.generation << '\n';
  }
  write_atomically(config_out, run_config_to_json(cfg).dump(2) + '\n');

  if (!resumed) {
    log.open(log_path, std::ios::trunc);
    summary.open(summary_path, std::ios::trunc);
    if (!log || !summary) throw Error("cannot write results in '" + dir.string() + "'");
    state = initialize(cfg.evolution, evaluate, build_seed_population(cfg, pool), hook);
  }
  run_to_end(state, cfg.evolution, evaluate, pool, hook);

  std::ostringstream final_pop;
  for (const auto& c : state.population) final_pop << format_genome(c.genome) << '\n';
  write_atomically(dir / "final_population.txt", final_pop.str());
  out << "wrote " << state.history.size() << " records for " << state.generation + 1 << " generations to "
      << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"livsynth: evolve, score and inspect LIV backbone genomes", "livsynth"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("livsynth 0.1.0"));

  auto* evolve = app.add_subcommand("evolve", "Run an evolution from a JSON config file");
  std::string config_path;
  bool resume = false, quiet = false;
  evolve->add_option("config", config_path, "Run config (JSON)")->required();
  evolve->add_flag("--resume", resume, "Continue from the snapshot in the output directory");
  evolve->add_flag("--quiet", quiet, "No per-generation progress");

  auto* score = app.add_subcommand("score", "Parameter count and inference cache of a genome");
  GenomeSource score_src;
  score_src.attach(*score, 768);
  std::size_t seq_len = 4096, bytes = kDefaultBytesPerElement;
  int head_dim = 64;
  bool as_json = false, per_instance = false;
  score->add_option("--seq-len", seq_len, "Sequence length for the cache")->capture_default_str()->check(CLI::PositiveNumber);
  score->add_option("--bytes-per-element", bytes, "Bytes per cached value")->capture_default_str()->check(CLI::PositiveNumber);
  score->add_option("--head-dim", head_dim, "Attention head dimension")->capture_default_str()->check(CLI::PositiveNumber);
  score->add_flag("--json", as_json, "One JSON object instead of text");
  score->add_flag("--per-instance", per_instance, "Break the totals down by instance");

  auto* render = app.add_subcommand("render", "Draw a backbone with its sharing arcs");
  GenomeSource render_src;
  render_src.attach(*render, 32);
  std::string format = "text";
  render->add_option("--format", format, "text, dot or json")
      ->capture_default_str()
      ->check(CLI::IsMember({"text", "dot", "json"}));

  auto* motifs = app.add_subcommand("motifs", "Per-generation motif statistics of a results log");
  std::string log_path, motif_format = "table";
  motifs->add_option("log", log_path, "results.jsonl written by evolve")->required();
  motifs->add_option("--format", motif_format, "table or jsonl")
      ->capture_default_str()
      ->check(CLI::IsMember({"table", "jsonl"}));

  auto* defaults = app.add_subcommand("defaults", "Print the default run config");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*evolve) return cmd_evolve(config_path, resume, quiet, out, err);
    if (*score) return cmd_score(score_src, seq_len, bytes, head_dim, as_json, per_instance, out);
    if (*render) return cmd_render(render_src, format, out);
    if (*motifs) return cmd_motifs(log_path, motif_format, out, err);
    if (*defaults) {
      out << run_config_to_json(RunConfig{}).dump(2) << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const PoolError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace livsynth
