#include "livsynth/records.hpp"

#include <cmath>
#include <limits>

#include "livsynth/errors.hpp"

namespace livsynth {

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_number(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace

json genome_to_json(const BackboneGenome& g) {
  json genes = json::array();
  for (const auto& x : g.genes) {
    json e{{"liv_class", x.liv_class},
           {"feat_share_group", x.feat_share_group},
           {"feat_share_strategy", x.feat_share_strategy},
           {"group_share_group", x.group_share_group},
           {"group_share_strategy", x.group_share_strategy}};
    if (x.residual_group) e["residual_group"] = *x.residual_group;
    genes.push_back(std::move(e));
  }
  return {{"width", g.width}, {"genes", genes}};
}

BackboneGenome genome_from_json(const json& j) {
  BackboneGenome g;
  try {
    g.width = j.value("width", 32);
    for (const auto& e : j.at("genes")) {
      LivGene x;
      x.liv_class = e.at("liv_class").get<int>();
      x.feat_share_group = e.at("feat_share_group").get<int>();
      x.feat_share_strategy = e.at("feat_share_strategy").get<int>();
      x.group_share_group = e.at("group_share_group").get<int>();
      x.group_share_strategy = e.at("group_share_strategy").get<int>();
      if (e.contains("residual_group") && !e["residual_group"].is_null()) x.residual_group = e["residual_group"].get<int>();
      g.genes.push_back(x);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed genome record: ") + e.what());
  }
  return g;
}

json score_to_json(const ScoreVector& s, const std::vector<Objective>& objectives) {
  json values = json::object();
  for (std::size_t k = 0; k < objectives.size(); ++k)
    values[objective_name(objectives[k])] = k < s.values.size() ? number(s.values[k]) : json(nullptr);
  json out{{"values", values}, {"diverged", s.diverged}};
  if (!s.note.empty()) out["note"] = s.note;
  return out;
}

ScoreVector score_from_json(const json& j, const std::vector<Objective>& objectives) {
  ScoreVector s;
  const auto& values = j.at("values");
  for (auto o : objectives) s.values.push_back(read_number(values.at(objective_name(o))));
  s.diverged = j.at("diverged").get<bool>();
  s.note = j.value("note", "");
  return s;
}

json cost_to_json(const CostReport& r) {
  json inst = json::array();
  for (const auto& i : r.instances)
    inst.push_back({{"index", i.index}, {"name", i.name}, {"parameters", i.parameters}, {"cache_bytes", i.cache_bytes}});
  return {{"parameter_count", r.parameter_count},
          {"cache_bytes", r.cache_bytes},
          {"seq_len", r.seq_len},
          {"bytes_per_element", r.bytes_per_element},
          {"instances", inst}};
}

json record_to_json(const HistoryRecord& r, const std::vector<Objective>& objectives) {
  const auto& c = r.candidate;
  return {{"generation", r.generation},
          {"index", r.index},
          {"genome", format_genome(c.genome)},
          {"width", c.genome.width},
          {"score", score_to_json(c.score, objectives)},
          {"rank", c.rank},
          {"crowding", number(c.crowding)},
          {"fitness", number(c.fitness)},
          {"cached", c.cached},
          {"selected", r.selected}};
}

HistoryRecord record_from_json(const json& j, const std::vector<Objective>& objectives) {
  HistoryRecord r;
  r.generation = j.at("generation").get<std::size_t>();
  r.index = j.at("index").get<std::size_t>();
  r.candidate.genome = parse_genome(j.at("genome").get<std::string>(), j.at("width").get<int>());
  r.candidate.score = score_from_json(j.at("score"), objectives);
  r.candidate.rank = j.at("rank").get<std::size_t>();
  r.candidate.crowding = read_number(j.at("crowding"));
  r.candidate.fitness = read_number(j.at("fitness"));
  r.candidate.cached = j.at("cached").get<bool>();
  r.selected = j.at("selected").get<bool>();
  return r;
}

json state_to_json(const EvolutionState& s, const std::vector<Objective>& objectives) {
  json pop = json::array();
  for (std::size_t i = 0; i < s.population.size(); ++i)
    pop.push_back(record_to_json({s.generation, i, s.population[i], true}, objectives));
  json hist = json::array();
  for (const auto& r : s.history) hist.push_back(record_to_json(r, objectives));
  json memo = json::array();
  for (const auto& [h, score] : s.memo) memo.push_back({{"hash", std::to_string(h)}, {"score", score_to_json(score, objectives)}});
  return {{"generation", s.generation}, {"rng", s.rng.save()}, {"population", pop}, {"history", hist}, {"memo", memo}};
}

EvolutionState state_from_json(const json& j, const std::vector<Objective>& objectives) {
  EvolutionState s;
  try {
    s.generation = j.at("generation").get<std::size_t>();
    s.rng.restore(j.at("rng").get<std::string>());
    for (const auto& r : j.at("population")) s.population.push_back(record_from_json(r, objectives).candidate);
    for (const auto& r : j.at("history")) s.history.push_back(record_from_json(r, objectives));
    for (const auto& m : j.at("memo"))
      s.memo[std::stoull(m.at("hash").get<std::string>())] = score_from_json(m.at("score"), objectives);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed snapshot: ") + e.what());
  }
  return s;
}

}  // namespace livsynth
