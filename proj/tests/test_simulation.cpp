#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "exergm/formula.hpp"
#include "exergm/simulation.hpp"
#include "helpers.hpp"
#include "oracle.hpp"

using namespace exergm;
namespace fs = std::filesystem;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double mean_ties(const std::vector<Graph>& gs) {
  double s = 0;
  for (const auto& g : gs) s += g.tie_count();
  return s / static_cast<double>(gs.size());
}

}  // namespace

TEST_CASE("mean edge count under edges-only models") {
  TableCache cache;
  const ModelSpec m = parse_formula("edges");
  const auto a = sample_graphs(vec({0}), m, 4, true, AttributeTable(4), 20000, 1, cache);
  // sd of the mean: sqrt(3 / 20000) ~ 0.012
  CHECK(std::abs(mean_ties(a) - 6.0) < 0.06);
  const auto b = sample_graphs(vec({-2}), m, 4, true, AttributeTable(4), 20000, 2, cache);
  const double expect = 12.0 / (1.0 + std::exp(2.0));
  CHECK(expect == doctest::Approx(1.431).epsilon(1e-3));
  CHECK(std::abs(mean_ties(b) - expect) < 0.05);
}

TEST_CASE("draws respect constraints") {
  TableCache cache;
  const ModelSpec m = parse_formula("edges + constraint(edges >= 5) + constraint(ttriad <= 6)");
  for (const auto& g : sample_graphs(vec({-1}), m, 4, true, AttributeTable(4), 3000, 3, cache)) {
    const auto a = oracle::from_graph(g);
    CHECK(oracle::model_offset(m, a, true, AttributeTable(4)) == 0.0);
  }
}

TEST_CASE("indexed and streaming samplers draw the same graphs") {
  TableCache cache;
  AttributeTable attrs(4);
  attrs.set("g", {0, 1, 1, 0});
  const ModelSpec m = parse_formula("edges + nodematch(g) + ttriad + offset(mutual)");
  const auto table = cache.get(4, true, m, attrs);
  const auto index = std::make_shared<const RowIndex>(*table, m, attrs);
  const Eigen::VectorXd theta = vec({-0.5, 1, 0.2});
  const ExactSampler streaming(table, m, attrs, theta);
  const ExactSampler indexed(table, m, attrs, theta, index);
  std::mt19937_64 r1(11), r2(11);
  const auto a = streaming.draw(500, r1);
  const auto b = indexed.draw(500, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].index() == b[i].index());
}

TEST_CASE("row index lists each graph once under its row") {
  TableCache cache;
  const ModelSpec m = parse_formula("edges + ttriad");
  const auto t = cache.get(4, true, m, AttributeTable(4));
  const RowIndex idx(*t, m, AttributeTable(4));
  std::vector<int> seen(4096, 0);
  for (Eigen::Index r = 0; r < t->rows(); ++r) {
    CHECK(idx.row_size(r) == t->weights()[r]);
    for (std::uint64_t j = 0; j < idx.row_size(r); ++j) {
      const Graph g = Graph::from_index(idx.graph(r, j), 4, true);
      const auto s = oracle::model_stats(m, oracle::from_graph(g), true, AttributeTable(4));
      CHECK(s[0] == t->q()(r, 0));
      CHECK(s[1] == t->q()(r, 1));
      ++seen[idx.graph(r, j)];
    }
  }
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("sampling frequencies follow exact probabilities at n = 3") {
  TableCache cache;
  const ModelSpec m = parse_formula("edges + mutual");
  const std::vector<double> theta{-0.4, 0.9};
  const auto p = oracle::oracle_prob(theta, m, AttributeTable(3), 3, true);
  const auto g = sample_graphs(vec({-0.4, 0.9}), m, 3, true, AttributeTable(3), 64000, 17, cache);
  std::vector<double> count(64, 0);
  for (const auto& x : g) count[oracle::encode(oracle::from_graph(x), true)] += 1;
  double chi = 0;
  for (int k = 0; k < 64; ++k) {
    const double e = p[k] * 64000;
    chi += (count[k] - e) * (count[k] - e) / e;
  }
  // 63 df: the 0.9999 quantile is about 116
  CHECK(chi < 116);
}

TEST_CASE("graphs within a row are uniform") {
  TableCache cache;
  const ModelSpec m = parse_formula("edges");
  const auto t = cache.get(3, true, m, AttributeTable(3));
  const ExactSampler s(t, m, AttributeTable(3), vec({0}));
  std::mt19937_64 rng(5);
  std::map<std::uint64_t, int> by_graph;
  int in_row = 0;
  for (const auto& g : s.draw(60000, rng)) {
    if (g.tie_count() == 2) {
      ++by_graph[g.index()];
      ++in_row;
    }
  }
  CHECK(by_graph.size() == 15);
  for (const auto& [k, c] : by_graph) CHECK(std::abs(c - in_row / 15.0) < 5 * std::sqrt(in_row / 15.0));
}

TEST_CASE("seeded sampling is reproducible") {
  TableCache cache;
  const ModelSpec m = parse_formula("edges + ttriad");
  const auto a = sample_graphs(vec({-1, 0.3}), m, 4, true, AttributeTable(4), 50, 42, cache);
  const auto b = sample_graphs(vec({-1, 0.3}), m, 4, true, AttributeTable(4), 50, 42, cache);
  const auto c = sample_graphs(vec({-1, 0.3}), m, 4, true, AttributeTable(4), 50, 43, cache);
  bool all_same = true, differs = false;
  for (std::size_t i = 0; i < 50; ++i) {
    all_same = all_same && a[i].index() == b[i].index();
    differs = differs || a[i].index() != c[i].index();
  }
  CHECK(all_same);
  CHECK(differs);
}

TEST_CASE("sampler rejects non-finite parameters") {
  TableCache cache;
  const ModelSpec m = parse_formula("edges");
  CHECK_THROWS_AS(sample_graphs(vec({INFINITY}), m, 3, true, AttributeTable(3), 1, 1, cache),
                  std::invalid_argument);
}

TEST_CASE("fivenets regeneration") {
  TableCache cache;
  const NetworkSample a = regenerate_fivenets(7, cache);
  const NetworkSample b = regenerate_fivenets(7, cache);
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a[i].graph.n() == 4);
    CHECK(a[i].graph.directed());
    CHECK(a[i].id == std::to_string(i + 1));
    CHECK(a[i].attributes.contains("gender"));
    CHECK(a[i].graph.index() == b[i].graph.index());
    CHECK(a[i].attributes == b[i].attributes);
  }
  const Eigen::MatrixXd s = observed_statistics(a, parse_formula("edges + nodematch(gender)"));
  CHECK(s.rows() == 5);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(s(i, 1) <= s(i, 0));
}

TEST_CASE("boundary filter") {
  TableCache cache;
  const ModelSpec m = parse_formula("edges");
  using testing_util::network;
  CHECK(boundary_filter({network("a", testing_util::graph_with_ties(4, true, 3))}, m, cache));
  CHECK_FALSE(boundary_filter({network("a", Graph(4, true))}, m, cache));
  CHECK_FALSE(boundary_filter({network("a", testing_util::complete_graph(4, true))}, m, cache));
  CHECK(boundary_filter({network("a", Graph(4, true)), network("b", testing_util::complete_graph(4, true))}, m, cache));
}

TEST_CASE("study configs") {
  const StudyConfig p = power_study_config();
  CHECK(p.replications == 2000);
  CHECK(power_study_config(true).replications == 20000);
  CHECK(type_one_study_config().replications == 3500);
  CHECK(type_one_study_config(true).replications == 35000);
  CHECK(study_config_from_json(study_config_to_json(p)).fingerprint() == p.fingerprint());
  StudyConfig q = p;
  q.threads = 8;
  CHECK(q.fingerprint() == p.fingerprint());
  q.seed = 2;
  CHECK(q.fingerprint() != p.fingerprint());
  const StudyConfig r = study_config_from_json(R"({"preset": "type_one", "replications": 10})");
  CHECK(r.replications == 10);
  CHECK(r.fitting_model == "edges + ttriad");
  CHECK_THROWS(study_config_from_json(R"({"replicatons": 10})"));
  StudyConfig bad = p;
  bad.generating_model = "edges + nodematch(g)";
  CHECK_THROWS(bad.validate());
}

TEST_CASE("study runs are deterministic, thread independent and resumable") {
  TableCache cache;
  StudyConfig c = type_one_study_config();
  c.replications = 40;
  c.sample_sizes = {5, 10};
  c.seed = 21;
  const StudyResult a = run_sim_study(c, cache);
  c.threads = 3;
  const StudyResult b = run_sim_study(c, cache);
  REQUIRE(a.records.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) {
    CHECK(record_to_json(a.records[i]).size() > 0);
    CHECK(a.records[i].sample_size == c.sample_sizes[i % 2]);
    auto strip = [](ReplicationRecord r) {
      r.seconds = 0;
      return record_to_json(r);
    };
    CHECK(strip(a.records[i]) == strip(b.records[i]));
  }

  const fs::path dir = fs::temp_directory_path() / "exergm_test_study";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path ck = dir / "records.jsonl";
  c.threads = 1;
  c.replications = 20;
  run_sim_study(c, cache, ck);
  // simulate an interrupted run: keep 12 lines and a torn 13th
  std::vector<std::string> lines;
  {
    std::ifstream in(ck);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  REQUIRE(lines.size() == 21);
  {
    std::ofstream out(ck, std::ios::trunc);
    for (int i = 0; i < 13; ++i) out << lines[i] << '\n';
    out << lines[13].substr(0, lines[13].size() / 2);
  }
  c.replications = 40;
  const StudyResult resumed = run_sim_study(c, cache, ck);
  REQUIRE(resumed.records.size() == 40);
  for (std::size_t i = 0; i < 40; ++i) {
    ReplicationRecord x = resumed.records[i], y = a.records[i];
    x.seconds = y.seconds = 0;
    CHECK(record_to_json(x) == record_to_json(y));
  }
  StudyConfig other = c;
  other.seed = 22;
  CHECK_THROWS(run_sim_study(other, cache, ck));
}

TEST_CASE("aggregates") {
  StudyConfig c = power_study_config();
  c.generating_model = "edges + ttriad";
  c.fitting_model = "edges + ttriad";
  c.sample_sizes = {5};
  std::vector<ReplicationRecord> recs;
  for (int i = 0; i < 4; ++i) {
    ReplicationRecord r;
    r.replication = i;
    r.sample_size = 5;
    r.kept = true;
    r.status = "00";
    r.theta_true = vec({0.3, -1.5});
    r.estimate = vec({0.3 + (i % 2 ? 0.2 : 0.4), -1.5});
    r.std_error = vec({0.1, 0.1});
    r.p_value = vec({i == 0 ? 0.5 : 0.01, 0.01});
    recs.push_back(r);
  }
  ReplicationRecord dropped;
  dropped.replication = 4;
  dropped.sample_size = 5;
  dropped.kept = false;
  recs.push_back(dropped);
  const StudyAggregates ag = aggregate_study(c, recs);
  CHECK(ag.kept == 4);
  CHECK(ag.usable == 4);
  REQUIRE(ag.bias.size() == 2);
  CHECK(ag.bias[0].mean == doctest::Approx(0.3));
  CHECK(ag.bias[1].mean == doctest::Approx(0.0));
  bool found = false;
  for (const auto& p : ag.power) {
    if (p.term == "edges" && p.bin_low == 0.1 && p.count > 0) {
      CHECK(p.count == 4);
      CHECK(p.significant == 3);
      found = true;
    }
  }
  CHECK(found);
  CHECK(ag.type_one.empty());
  CHECK(aggregates_to_csv(ag).find("kind,term,sample_size,bin_low,bin_high,count,hits,value,ci_low,ci_high") == 0);
}

TEST_CASE("record json round trip") {
  ReplicationRecord r;
  r.replication = 3;
  r.seed = 123456789012345ULL;
  r.sample_size = 30;
  r.n_small = 12;
  r.n_large = 18;
  r.theta_true = vec({-0.25, 1.75});
  r.kept = true;
  r.status = "20";
  r.estimate = vec({0.1, INFINITY});
  r.std_error = vec({0.3, 0});
  r.p_value = vec({0.7, NAN});
  const ReplicationRecord s = record_from_json(record_to_json(r));
  CHECK(s.seed == r.seed);
  CHECK(s.estimate[1] == INFINITY);
  CHECK(std::isnan(s.p_value[1]));
  CHECK(record_to_json(s) == record_to_json(r));
  CHECK_FALSE(s.usable());
}
