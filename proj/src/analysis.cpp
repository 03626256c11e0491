#include "livsynth/analysis.hpp"

#include <algorithm>
#include <json.hpp>
#include <sstream>

namespace livsynth {

std::vector<Arc> sharing_arcs(const BackboneGenome& g, const OptionPool& pool) {
  std::vector<Arc> arcs;
  auto add = [&](const std::vector<SharingGroup>& groups, ArcKind kind) {
    for (const auto& s : groups) {
      Arc a{kind, s.label, s.strategy, {}, {}};
      for (auto m : s.members) a.positions.push_back(m + 1);
      if (kind == ArcKind::FeatureGroup && pool.contains(g.genes[s.members.front()].liv_class)) {
        const auto strategies = pool.group_share_strategies(g.genes[s.members.front()].liv_class);
        if (s.strategy >= 1 && static_cast<std::size_t>(s.strategy) <= strategies.size())
          a.roles = strategies[s.strategy - 1];
      }
      arcs.push_back(std::move(a));
    }
  };
  add(featurizer_sharing_groups(g), ArcKind::Featurizer);
  add(feature_group_sharing_groups(g), ArcKind::FeatureGroup);
  std::stable_sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) {
    if (a.kind != b.kind) return a.kind == ArcKind::Featurizer;
    return a.positions.front() < b.positions.front();
  });
  return arcs;
}

namespace {

std::string class_name(int id, const OptionPool& pool) {
  return pool.contains(id) ? pool.liv(id).name : "class-" + std::to_string(id);
}

// Column marks for one row: 'o' on members, the continuation glyph between them.
std::string arc_columns(const std::vector<const Arc*>& arcs, std::size_t pos, char line) {
  std::string s;
  for (const auto* a : arcs) {
    const bool member = std::find(a->positions.begin(), a->positions.end(), pos) != a->positions.end();
    const bool inside = pos > a->positions.front() && pos < a->positions.back();
    s += member ? 'o' : inside ? line : ' ';
    s += ' ';
  }
  return s;
}

std::string join_positions(const std::vector<std::size_t>& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "-" : "") + std::to_string(p[i]);
  return s;
}

}  // namespace

std::string render_text(const BackboneGenome& g, const OptionPool& pool) {
  const auto arcs = sharing_arcs(g, pool);
  std::vector<const Arc*> left, right;
  for (const auto& a : arcs) (a.kind == ArcKind::FeatureGroup ? left : right).push_back(&a);

  std::size_t name_width = 3;
  for (const auto& x : g.genes) name_width = std::max(name_width, class_name(x.liv_class, pool).size());

  std::ostringstream os;
  os << "backbone: " << format_genome(g) << " (width " << g.width << ")\n";
  for (std::size_t i = 1; i <= g.depth(); ++i) {
    std::string name = class_name(g.genes[i - 1].liv_class, pool);
    name.resize(name_width, ' ');
    std::string row = arc_columns(left, i, ':');
    row += (i < 10 ? " " : "") + std::to_string(i) + "  " + name + "  " + arc_columns(right, i, '|');
    while (!row.empty() && row.back() == ' ') row.pop_back();
    os << row << '\n';
  }
  for (const auto* a : right)
    os << "featurizer sharing (solid, right): " << join_positions(a->positions) << " [label " << a->label
       << ", strategy " << a->strategy << "]\n";
  for (const auto* a : left) {
    os << "feature-group sharing (dashed, left): " << join_positions(a->positions) << " [label " << a->label
       << ", strategy " << a->strategy;
    if (!a->roles.empty()) {
      os << ":";
      for (const auto& r : a->roles) os << ' ' << r;
    }
    os << "]\n";
  }
  for (const auto& r : residual_groups(g)) {
    std::vector<std::size_t> p;
    for (auto m : r.members) p.push_back(m + 1);
    os << "residual extension: " << join_positions(p) << " [group " << r.label << "]\n";
  }
  if (arcs.empty()) os << "no sharing\n";
  return os.str();
}

std::string render_dot(const BackboneGenome& g, const OptionPool& pool) {
  std::ostringstream os;
  os << "digraph backbone {\n  rankdir=TB;\n  node [shape=box, fontname=\"Helvetica\"];\n";
  for (std::size_t i = 1; i <= g.depth(); ++i)
    os << "  n" << i << " [label=\"" << i << ": " << class_name(g.genes[i - 1].liv_class, pool) << "\"];\n";
  for (std::size_t i = 1; i < g.depth(); ++i) os << "  n" << i << " -> n" << i + 1 << " [color=gray];\n";
  for (const auto& a : sharing_arcs(g, pool)) {
    const bool feat = a.kind == ArcKind::Featurizer;
    const char* port = feat ? "e" : "w";
    for (std::size_t k = 0; k + 1 < a.positions.size(); ++k)
      os << "  n" << a.positions[k] << ":" << port << " -> n" << a.positions[k + 1] << ":" << port << " [style="
         << (feat ? "solid" : "dashed") << ", dir=none, constraint=false, color=" << (feat ? "blue" : "red")
         << ", tooltip=\"" << (feat ? "featurizer" : "feature-group") << " label " << a.label << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

std::vector<std::size_t> sharing_distances(const BackboneGenome& g) {
  std::vector<std::size_t> out;
  for (const auto& groups : {featurizer_sharing_groups(g), feature_group_sharing_groups(g)})
    for (const auto& s : groups)
      for (std::size_t k = 0; k + 1 < s.members.size(); ++k) out.push_back(s.members[k + 1] - s.members[k] - 1);
  return out;
}

MotifRow motif_row(std::size_t generation, const std::vector<BackboneGenome>& population, const OptionPool& pool) {
  MotifRow row;
  row.generation = generation;
  row.genomes = population.size();
  for (int id : pool.class_ids()) row.class_counts[id] = 0;
  double total = 0.0;
  for (const auto& g : population) {
    for (const auto& x : g.genes) ++row.class_counts[x.liv_class];
    for (const auto& s : featurizer_sharing_groups(g)) row.featurizer_shared += s.members.size();
    for (const auto& s : feature_group_sharing_groups(g)) row.group_shared += s.members.size();
    for (auto d : sharing_distances(g)) {
      total += static_cast<double>(d);
      ++row.pairs;
    }
  }
  row.mean_distance = row.pairs ? total / static_cast<double>(row.pairs) : 0.0;
  return row;
}

MotifReport motifs_from_log(std::istream& log, const OptionPool& pool) {
  MotifReport report;
  std::map<std::size_t, std::vector<BackboneGenome>> populations;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(log, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!j.value("selected", true)) continue;
      const auto gen = j.at("generation").get<std::size_t>();
      populations[gen].push_back(parse_genome(j.at("genome").get<std::string>(), j.value("width", 32)));
    } catch (const std::exception& e) {
      ++report.skipped;
      report.warnings.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (const auto& [gen, pop] : populations) report.rows.push_back(motif_row(gen, pop, pool));
  return report;
}

}  // namespace livsynth
