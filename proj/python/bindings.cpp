#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "livsynth/analysis.hpp"
#include "livsynth/cli.hpp"
#include "livsynth/cost.hpp"
#include "livsynth/errors.hpp"
#include "livsynth/evolve.hpp"

namespace py = pybind11;
using namespace livsynth;

namespace {

const OptionPool& pool() { return OptionPool::standard(); }

py::dict cost_dict(const CostReport& r) {
  py::list inst;
  for (const auto& i : r.instances) {
    py::dict d;
    d["index"] = i.index;
    d["name"] = i.name;
    d["parameters"] = i.parameters;
    d["cache_bytes"] = i.cache_bytes;
    inst.append(d);
  }
  py::dict d;
  d["parameter_count"] = r.parameter_count;
  d["cache_bytes"] = r.cache_bytes;
  d["seq_len"] = r.seq_len;
  d["bytes_per_element"] = r.bytes_per_element;
  d["instances"] = inst;
  return d;
}

std::vector<ScoreVector> to_scores(const std::vector<std::vector<double>>& values) {
  std::vector<ScoreVector> out;
  for (const auto& v : values) out.push_back(ScoreVector{v, false, ""});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "LIV backbone genomes: parsing, cost model, sharing diagrams and selection primitives";

  // translators run newest first, so the base class goes first
  py::register_exception<Error>(m, "LivsynthError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "GenomeParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("canonical", [](const std::string& text) { return format_genome(parse_genome(text)); },
        "Canonical text of a compact or canonical genome.");
  m.def("validate", [](const std::string& text) {
    std::vector<std::string> out;
    for (const auto& v : validate(parse_genome(text), pool())) out.push_back(v.message);
    return out;
  }, "Rule violations of a genome; empty when valid.");
  m.def("striped_hybrid", [](std::size_t depth, const std::string& cls) {
    const int id = pool().find(cls);
    if (!id) throw ConfigError("unknown LIV class '" + cls + "'");
    return format_genome(striped_hybrid(depth, 32, id));
  }, py::arg("depth"), py::arg("liv_class"));
  m.def("class_names", [] {
    std::vector<std::string> out;
    for (int id : pool().class_ids()) out.push_back(pool().liv(id).name);
    return out;
  });

  m.def("score", [](const std::string& text, int width, int head_dim, std::size_t seq_len, std::size_t bytes) {
    CompileDims d;
    d.width = width;
    d.head_dim = head_dim;
    d.seq_len = static_cast<int>(seq_len);
    return cost_dict(analyze(parse_genome(text, width), d, pool(), seq_len, bytes));
  }, py::arg("genome"), py::arg("width") = 768, py::arg("head_dim") = 64, py::arg("seq_len") = 4096,
        py::arg("bytes_per_element") = kDefaultBytesPerElement);

  m.def("render", [](const std::string& text, const std::string& format) {
    const auto g = parse_genome(text);
    if (format == "dot") return render_dot(g, pool());
    if (format == "text") return render_text(g, pool());
    throw ConfigError("format must be text or dot");
  }, py::arg("genome"), py::arg("format") = "text");
  m.def("sharing_distances", [](const std::string& text) { return sharing_distances(parse_genome(text)); });

  m.def("normalize", &normalize);
  m.def("fa_attraction", &fa_attraction, py::arg("a_i"), py::arg("a_j"), py::arg("r"), py::arg("beta0") = 1.0,
        py::arg("gamma") = 1.0);
  m.def("non_dominated_sort", [](const std::vector<std::vector<double>>& v) { return non_dominated_sort(to_scores(v)); });
  m.def("crowding_distance", [](const std::vector<std::vector<double>>& v) { return crowding_distance(to_scores(v)); });
  m.def("scalarize", [](const std::vector<std::vector<double>>& v) { return scalarize(to_scores(v)); });
  m.def("hypervolume", &hypervolume, py::arg("points"), py::arg("reference"));

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, "Runs the command line in-process; returns (exit code, stdout, stderr).");
}
