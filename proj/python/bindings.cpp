#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "exergm/estimation.hpp"
#include "exergm/formula.hpp"
#include "exergm/graph.hpp"
#include "exergm/inference.hpp"
#include "exergm/io.hpp"
#include "exergm/likelihood.hpp"
#include "exergm/simulation.hpp"
#include "exergm/stat_table.hpp"
#include "exergm/terms.hpp"
#include "exergm/version.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace exergm;

namespace {

using AttrMap = std::map<std::string, std::vector<double>>;

AttributeTable to_attrs(int n, const std::optional<AttrMap>& values) {
  AttributeTable a(n);
  if (values) {
    for (const auto& [name, v] : *values) a.set(name, v);
  }
  return a;
}

TableCache& default_cache() {
  static TableCache* cache = new TableCache();
  return *cache;
}

TableCache& pick(TableCache* cache) { return cache ? *cache : default_cache(); }

Graph graph_from_adjacency(const Eigen::Ref<const Eigen::MatrixXi>& a, bool directed) {
  if (a.rows() != a.cols()) throw std::invalid_argument("adjacency matrix must be square");
  const int n = static_cast<int>(a.rows());
  std::vector<std::pair<int, int>> ties;
  for (int i = 0; i < n; ++i) {
    for (int j = directed ? 0 : i + 1; j < n; ++j) {
      if (i == j) {
        if (a(i, j) != 0) throw std::invalid_argument("self-ties are not allowed");
        continue;
      }
      if (a(i, j) != 0 && a(i, j) != 1) throw std::invalid_argument("adjacency entries must be 0 or 1");
      if (!directed && a(i, j) != a(j, i)) throw std::invalid_argument("undirected adjacency must be symmetric");
      if (a(i, j)) ties.emplace_back(i, j);
    }
  }
  return Graph::from_edges(n, directed, ties);
}

Eigen::MatrixXi adjacency_of(const Graph& g) {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(g.n(), g.n());
  for (auto [i, j] : g.edges()) {
    a(i, j) = 1;
    if (!g.directed()) a(j, i) = 1;
  }
  return a;
}

py::dict coefficient_dict(const CoefficientRow& r) {
  return py::dict("term"_a = r.term, "estimate"_a = r.estimate, "std_error"_a = r.std_error, "z"_a = r.z,
                  "p_value"_a = r.p_value, "boundary"_a = boundary_name(r.boundary));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Exact-likelihood ERGMs for small networks";
  m.attr("__version__") = kVersion;

  static py::handle formula_error = py::exception<FormulaError>(m, "FormulaError", PyExc_ValueError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const FormulaError& e) {
      py::object err = formula_error(e.what());
      err.attr("position") = e.position();
      py::set_error(formula_error, err);
    }
  });
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  py::class_<Graph>(m, "Graph")
      .def(py::init<int, bool>(), "n"_a, "directed"_a = true)
      .def_static("from_edges",
                  [](int n, bool directed, const std::vector<std::pair<int, int>>& ties) {
                    return Graph::from_edges(n, directed, ties);
                  },
                  "n"_a, "directed"_a, "ties"_a)
      .def_static("from_adjacency", &graph_from_adjacency, "adjacency"_a, "directed"_a = true)
      .def_static("from_index", &Graph::from_index, "index"_a, "n"_a, "directed"_a = true)
      .def_property_readonly("n", &Graph::n)
      .def_property_readonly("directed", &Graph::directed)
      .def_property_readonly("index", &Graph::index)
      .def_property_readonly("cells", &Graph::cells)
      .def("has_tie", &Graph::has_tie, "i"_a, "j"_a)
      .def("tie_count", &Graph::tie_count)
      .def("edges", &Graph::edges)
      .def("adjacency", &adjacency_of)
      .def("__repr__", [](const Graph& g) {
        return "<Graph n=" + std::to_string(g.n()) + (g.directed() ? " directed" : " undirected") +
               " ties=" + std::to_string(g.tie_count()) + ">";
      });

  py::class_<Network>(m, "Network")
      .def(py::init([](std::string id, Graph g, std::optional<AttrMap> attrs) {
             const int n = g.n();
             return Network{std::move(id), std::move(g), to_attrs(n, attrs)};
           }),
           "id"_a, "graph"_a, "attributes"_a = py::none())
      .def_readwrite("id", &Network::id)
      .def_readonly("graph", &Network::graph)
      .def_property_readonly("attributes", [](const Network& n) { return n.attributes.values(); })
      .def("__repr__", [](const Network& n) {
        return "<Network " + n.id + " n=" + std::to_string(n.graph.n()) + ">";
      });

  m.def("parse_formula", [](const std::string& text) { return print_formula(parse_formula(text)); },
        "formula"_a, "Canonical form of a model formula.");
  m.def("term_names", [](const std::string& text) { return parse_formula(text).term_names(); }, "formula"_a);
  m.def("statistics",
        [](const std::string& formula, const Graph& g, std::optional<AttrMap> attrs) {
          return eval_stats(parse_formula(formula), g, to_attrs(g.n(), attrs));
        },
        "formula"_a, "graph"_a, "attributes"_a = py::none());

  py::class_<TableCache>(m, "TableCache")
      .def(py::init([](std::optional<std::filesystem::path> dir, unsigned threads) {
             BuildOptions o;
             o.threads = threads;
             return std::make_unique<TableCache>(std::move(dir), o);
           }),
           "directory"_a = py::none(), "threads"_a = 0)
      .def("__len__", &TableCache::size)
      .def_property_readonly("builds", &TableCache::builds);

  py::class_<StatTable, std::shared_ptr<StatTable>>(m, "StatTable")
      .def_property_readonly("q", &StatTable::q)
      .def_property_readonly("weights", &StatTable::weights)
      .def_property_readonly("offsets", &StatTable::offsets)
      .def_property_readonly("rows", &StatTable::rows)
      .def_property_readonly("total_weight", &StatTable::total_weight)
      .def_property_readonly("excluded_graphs", [](const StatTable& t) { return t.meta().excluded_graphs; })
      .def_property_readonly("cache_key", [](const StatTable& t) { return t.meta().cache_key; })
      .def("bounds", &table_bounds);

  m.def("support_table",
        [](const std::string& formula, int n, bool directed, std::optional<AttrMap> attrs, TableCache* cache) {
          const ModelSpec model = parse_formula(formula);
          const AttributeTable a = to_attrs(n, attrs);
          py::gil_scoped_release release;
          return std::const_pointer_cast<StatTable>(pick(cache).get(n, directed, model, a));
        },
        "formula"_a, "n"_a, "directed"_a = true, "attributes"_a = py::none(), "cache"_a = nullptr);

  py::class_<PooledData>(m, "PooledData")
      .def(py::init([](const NetworkSample& sample, const std::string& formula, TableCache* cache) {
             const ModelSpec model = parse_formula(formula);
             py::gil_scoped_release release;
             return make_pooled_data(sample, model, pick(cache));
           }),
           "networks"_a, "formula"_a, "cache"_a = nullptr)
      .def_property_readonly("size", &PooledData::size)
      .def_property_readonly("n_obs", &PooledData::n_obs)
      .def_property_readonly("observed", &PooledData::observed_total)
      .def_property_readonly("fingerprint", &PooledData::fingerprint)
      .def("loglik", [](const PooledData& d, const Eigen::VectorXd& t) { return loglik_pooled(t, d); }, "theta"_a)
      .def("gradient", [](const PooledData& d, const Eigen::VectorXd& t) { return gradient_pooled(t, d); }, "theta"_a)
      .def("hessian", [](const PooledData& d, const Eigen::VectorXd& t) { return hessian_pooled(t, d); }, "theta"_a);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("term_names", &FitResult::term_names)
      .def_readonly("formula", &FitResult::formula)
      .def_readonly("theta", &FitResult::theta)
      .def_readonly("theta_evaluated", &FitResult::theta_evaluated)
      .def_readonly("vcov", &FitResult::vcov)
      .def_readonly("hessian", &FitResult::hessian)
      .def_readonly("gradient", &FitResult::gradient)
      .def_readonly("loglik", &FitResult::loglik)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("n_obs", &FitResult::n_obs)
      .def_readonly("data_fingerprint", &FitResult::data_fingerprint)
      .def_property_readonly("status", [](const FitResult& f) { return status_code(f.status); })
      .def_property_readonly("status_message", [](const FitResult& f) { return status_message(f.status); })
      .def_property_readonly("aic", &aic)
      .def_property_readonly("bic", &bic)
      .def("coefficients", [](const FitResult& f) {
        py::list rows;
        for (const auto& r : coefficient_table(f)) rows.append(coefficient_dict(r));
        return rows;
      })
      .def("to_json", [](const FitResult& f) { return result_to_json(f); })
      .def_static("from_json", [](const std::string& text) { return result_from_json(text); }, "text"_a)
      .def("__repr__", [](const FitResult& f) { return "<FitResult " + f.formula + " status " + status_code(f.status) + ">"; });

  m.def("fit",
        [](const NetworkSample& sample, const std::string& formula, std::optional<Eigen::VectorXd> init,
           TableCache* cache) {
          const ModelSpec model = parse_formula(formula);
          FitOptions o;
          o.initial = std::move(init);
          py::gil_scoped_release release;
          return fit_mle(sample, model, pick(cache), o);
        },
        "networks"_a, "formula"_a, "init"_a = py::none(), "cache"_a = nullptr);

  m.def("lr_test",
        [](const FitResult& restricted, const FitResult& full) {
          const LrTest t = lr_test(restricted, full);
          return py::dict("statistic"_a = t.statistic, "df"_a = t.df, "p_value"_a = t.p_value);
        },
        "restricted"_a, "full"_a);

  m.def("bootstrap",
        [](const NetworkSample& sample, const std::string& formula, int replicates, std::uint64_t seed,
           unsigned threads, TableCache* cache) {
          const ModelSpec model = parse_formula(formula);
          BootOptions o;
          o.replicates = replicates;
          o.seed = seed;
          o.threads = threads;
          BootResult b;
          {
            py::gil_scoped_release release;
            b = bootstrap(make_pooled_data(sample, model, pick(cache)), model, o);
          }
          return py::dict("replicates"_a = b.replicates, "vcov"_a = b.vcov, "requested"_a = b.requested,
                          "failed"_a = b.failed, "seed"_a = b.seed);
        },
        "networks"_a, "formula"_a, "replicates"_a = 1000, "seed"_a = 0, "threads"_a = 1, "cache"_a = nullptr);

  m.def("gof",
        [](const FitResult& fit, const NetworkSample& sample, double level, TableCache* cache) {
          const ModelSpec model = parse_formula(fit.formula);
          const PooledData data = make_pooled_data(sample, model, pick(cache));
          if (data.fingerprint() != fit.data_fingerprint) {
            throw std::invalid_argument("networks differ from the sample the model was fitted on");
          }
          const GofReport r = gof_exact(fit, data, 1.0 - level);
          py::list rows;
          for (const auto& row : r.rows) {
            rows.append(py::dict("network"_a = row.network_id, "term"_a = row.term_name, "observed"_a = row.observed,
                                 "min"_a = row.support_min, "max"_a = row.support_max, "lower"_a = row.lower,
                                 "upper"_a = row.upper, "covered"_a = row.covered));
          }
          return rows;
        },
        "fit"_a, "networks"_a, "level"_a = 0.9, "cache"_a = nullptr);

  m.def("simulate",
        [](const Eigen::VectorXd& theta, const std::string& formula, int n, bool directed, std::size_t count,
           std::uint64_t seed, std::optional<AttrMap> attrs, TableCache* cache) {
          const ModelSpec model = parse_formula(formula);
          const AttributeTable a = to_attrs(n, attrs);
          std::vector<Graph> graphs;
          {
            py::gil_scoped_release release;
            graphs = sample_graphs(theta, model, n, directed, a, count, seed, pick(cache));
          }
          NetworkSample sample;
          for (std::size_t i = 0; i < graphs.size(); ++i) sample.push_back({std::to_string(i + 1), graphs[i], a});
          return sample;
        },
        "theta"_a, "formula"_a, "n"_a, "directed"_a = true, "count"_a = 1, "seed"_a = 0,
        "attributes"_a = py::none(), "cache"_a = nullptr);

  m.def("regenerate_fivenets",
        [](std::uint64_t seed, TableCache* cache) { return regenerate_fivenets(seed, pick(cache)); },
        "seed"_a, "cache"_a = nullptr);

  m.def("sim_study",
        [](const std::string& config_json, std::optional<std::filesystem::path> checkpoint, TableCache* cache) {
          const StudyConfig config = study_config_from_json(config_json);
          StudyResult r;
          {
            py::gil_scoped_release release;
            r = run_sim_study(config, pick(cache), checkpoint);
          }
          py::list records;
          for (const auto& rec : r.records) records.append(record_to_json(rec));
          return py::dict("config"_a = study_config_to_json(r.config), "records"_a = records,
                          "aggregates"_a = aggregates_to_csv(r.aggregates), "kept"_a = r.aggregates.kept,
                          "usable"_a = r.aggregates.usable, "failed"_a = r.aggregates.failed);
        },
        "config"_a, "checkpoint"_a = py::none(), "cache"_a = nullptr,
        "Runs a study from a JSON config (e.g. '{\"preset\": \"type_one\", \"replications\": 50}').");

  m.def("read_networks", &read_networks, "path"_a);
  m.def("parse_networks", [](const std::string& text) { return parse_networks(text); }, "text"_a);
  m.def("networks_to_json", [](const NetworkSample& s) { return networks_to_json(s); }, "networks"_a);
  m.def("write_networks", [](const NetworkSample& s, const std::filesystem::path& p) { write_networks(s, p); },
        "networks"_a, "path"_a);
  m.def("read_result", &read_result, "path"_a);
}
