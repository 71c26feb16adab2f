#include <doctest.h>

#include <filesystem>

#include "exergm/formula.hpp"
#include "exergm/io.hpp"
#include "helpers.hpp"

using namespace exergm;
namespace fs = std::filesystem;

TEST_CASE("network file round trip") {
  NetworkSample s;
  Network a = testing_util::network("a", testing_util::graph_of(4, true, {{0, 1}, {2, 3}, {3, 2}}));
  a.attributes.set("gender", {0, 1, 1, 0});
  a.attributes.set("x", {0.25, 1.5, -2, 3});
  s.push_back(a);
  s.push_back(testing_util::network("b", testing_util::graph_of(3, false, {{0, 2}})));
  const std::string text = networks_to_json(s, {{"seed", "5"}});
  const NetworkSample t = parse_networks(text);
  REQUIRE(t.size() == 2);
  CHECK(t[0].id == "a");
  CHECK(t[0].graph.index() == s[0].graph.index());
  CHECK(t[0].attributes == s[0].attributes);
  CHECK_FALSE(t[1].graph.directed());
  CHECK(t[1].graph.has_tie(2, 0));
  CHECK(networks_to_json(t, {{"seed", "5"}}) == text);

  const fs::path p = fs::temp_directory_path() / "exergm_test_nets.json";
  write_networks(s, p);
  CHECK(read_networks(p).size() == 2);
}

TEST_CASE("adjacency input") {
  const NetworkSample s = parse_networks(R"({"format": "exergm-networks", "version": 1,
    "networks": [{"id": "m", "n": 3, "directed": true,
                  "adjacency": [[0,1,0],[0,0,1],[1,0,0]],
                  "attributes": {"flag": [true, false, true]}}]})");
  CHECK(s[0].graph.tie_count() == 3);
  CHECK(s[0].graph.has_tie(2, 0));
  CHECK(s[0].attributes.get("flag") == std::vector<double>{1, 0, 1});

  const NetworkSample t = parse_adjacency_text("0 1 0\n0 0 1\n1 0 0\n\n0 0\n1 0\n", true);
  REQUIRE(t.size() == 2);
  CHECK(t[0].id == "1");
  CHECK(t[1].graph.n() == 2);
  CHECK(t[1].graph.has_tie(1, 0));
  CHECK_THROWS_AS(parse_adjacency_text("0 1\n0", true), FormatError);
  CHECK(parse_adjacency_text("0 1\n1 0\n", false)[0].graph.tie_count() == 1);
  CHECK_THROWS_AS(parse_adjacency_text("0 1\n0 0\n", false), FormatError);
}

TEST_CASE("malformed network files give located errors") {
  auto message = [](const std::string& text) -> std::string {
    try {
      parse_networks(text, "nets.json");
    } catch (const FormatError& e) {
      return e.what();
    }
    return "";
  };
  const std::string head = R"({"format": "exergm-networks", "version": 1, "networks": )";
  CHECK(message("{") .find("nets.json") != std::string::npos);
  CHECK_FALSE(message(R"({"format": "other", "version": 1, "networks": []})").empty());
  CHECK_FALSE(message(R"({"format": "exergm-networks", "version": 9, "networks": []})").empty());
  CHECK_FALSE(message(head + "[]}").empty());
  const std::string bad_tie = message(head + R"([{"id": "q", "n": 3, "directed": true, "ties": [[0, 5]]}]})");
  CHECK(bad_tie.find("q") != std::string::npos);
  CHECK_FALSE(message(head + R"([{"id": "q", "n": 3, "directed": true, "ties": [[1, 1]]}]})").empty());
  CHECK_FALSE(message(head + R"([{"id": "q", "n": 3, "directed": true, "ties": [], "attributes": {"g": [1, 2]}}]})").empty());
  CHECK_FALSE(message(head + R"([{"id": "q", "n": 2, "directed": true, "ties": []},
                                  {"id": "q", "n": 2, "directed": true, "ties": []}]})").empty());
}

TEST_CASE("result file round trip is byte stable") {
  TableCache cache;
  NetworkSample s;
  for (int k : {3, 5, 8}) s.push_back(testing_util::network(std::to_string(k), testing_util::graph_with_ties(4, true, k)));
  const FitResult f = fit_mle(s, parse_formula("edges + mutual"), cache);
  ResultContext ctx;
  ctx.networks = 3;
  ctx.table_keys = {"abc"};
  ctx.seeds["fit"] = 4;
  const std::string text = result_to_json(f, ctx);
  CHECK(text.find("\"format\": \"exergm-result\"") != std::string::npos);
  const FitResult g = result_from_json(text);
  CHECK(g.theta == f.theta);
  CHECK(g.vcov == f.vcov);
  CHECK(g.status == f.status);
  CHECK(g.term_names == f.term_names);
  CHECK(g.data_fingerprint == f.data_fingerprint);
  CHECK(result_to_json(g, ctx) == text);
  CHECK(result_to_json(fit_mle(s, parse_formula("edges + mutual"), cache), ctx) == text);
}

TEST_CASE("infinite estimates survive the result file") {
  TableCache cache;
  const FitResult f = fit_mle({testing_util::network("a", testing_util::complete_graph(4, true))},
                              parse_formula("edges"), cache);
  const std::string text = result_to_json(f);
  CHECK(text.find("\"Inf\"") != std::string::npos);
  const FitResult g = result_from_json(text);
  CHECK(g.theta[0] == INFINITY);
  CHECK(g.status == FitStatus::all_infinite);
  CHECK_THROWS_AS(result_from_json("{\"format\": \"exergm-result\"}"), FormatError);
}

TEST_CASE("atomic text writes") {
  const fs::path p = fs::temp_directory_path() / "exergm_test_write.txt";
  write_text(p, "one");
  write_text(p, "two");
  CHECK(read_text(p) == "two");
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));
  CHECK_THROWS(read_text(fs::temp_directory_path() / "exergm_no_such_file"));
}
